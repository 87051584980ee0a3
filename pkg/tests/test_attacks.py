import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from kpleak.attacks import (
    COMPLEMENT,
    DIRECT,
    AttackError,
    KeyCandidate,
    auto_spa,
    class_means,
    cmta_bits,
    cmta_extract,
    correctness,
    correctness_profile,
    mean_slot,
    rank_candidates,
    slice_slots,
    verify_candidate,
)
from kpleak.curve import SECP256K1, reference_scalar_mul
from kpleak.ladder import Scalar
from kpleak.power import Trace, compress, per_block_trace, synthesize_trace


def make_trace(rows):
    m = np.asarray(rows, dtype=np.float64)
    return Trace(m.ravel().copy(), 1, m.shape[1], m.shape[0], 0)


def key_for(bits):
    return Scalar.from_bits("1" + "".join(map(str, bits)))


# -- slicing and means -----------------------------------------------------

def test_slice_defaults(plain64, k64):
    tr = synthesize_trace(plain64[1])
    v = slice_slots(tr)
    assert v.num_slots == k64.length - 1
    assert v.slot(0)[0] == tr.samples[v.offset]
    assert v.matrix.base is not None  # a view, not a copy
    with pytest.raises(AttackError):
        slice_slots(tr, offset=len(tr))
    with pytest.raises(AttackError):
        slice_slots(tr, slot_len=tr.slot_len + 1)


def test_mean_slot():
    v = slice_slots(make_trace([[1.0, 2.0]] * 4))
    assert mean_slot(v).tolist() == [1.0, 2.0]
    v = slice_slots(make_trace([[1.0, 5.0], [3.0, 6.0]]))
    assert mean_slot(v).tolist() == [2.0, 5.5]


def test_cmta_hand_example():
    v = slice_slots(make_trace([[0.5], [2.0], [0.5]]))
    assert mean_slot(v)[0] == 1.0
    (cand,) = cmta_extract(v)
    assert cand.bits.tolist() == [1, 0, 1]
    assert cand.polarity == DIRECT
    assert cand.complement().bits.tolist() == [0, 1, 0]


def test_cmta_needs_two_slots():
    with pytest.raises(AttackError):
        cmta_bits(slice_slots(make_trace([[1.0, 2.0]])))


def test_constant_trace_ties_to_zero():
    v = slice_slots(make_trace(np.full((6, 4), 2.5)))
    assert not cmta_bits(v).any()
    bits = [1, 0, 0, 1, 0, 1]
    prof = correctness_profile(v, key_for(bits))
    assert np.all(prof.values == 100.0 * 3 / 6)


def test_correctness_values():
    bits = np.array([1, 0, 1, 1, 0, 0], dtype=np.uint8)
    k = key_for(bits)
    assert correctness(KeyCandidate(bits, 0), k) == 100.0
    assert correctness(KeyCandidate(1 - bits, 0), k) == 0.0
    half = bits.copy()
    half[:3] ^= 1
    assert correctness(KeyCandidate(half, 0), k) == 50.0
    with pytest.raises(AttackError):
        correctness(KeyCandidate(bits[:5], 0), k)


def test_class_means_constructed():
    rows = [[1.3, 0.0], [0.9, 0.0], [1.3, 0.0], [0.9, 0.0], [0.9, 0.0]]
    v = slice_slots(make_trace(rows))
    k = key_for([0, 1, 0, 1, 1])
    m0, m1 = class_means(v, k)
    assert m0[0] == pytest.approx(1.3) and m1[0] == pytest.approx(0.9)
    assert m1[0] < mean_slot(v)[0] < m0[0]
    assert m0[1] == m1[1] == mean_slot(v)[1]
    with pytest.raises(AttackError):
        class_means(v, key_for([1, 1, 1, 1, 1]))


# -- on generated traces ---------------------------------------------------

def test_pipeline_plain(plain64, k64):
    v = slice_slots(synthesize_trace(plain64[1]))
    cands = cmta_extract(v)
    truth = k64.processed_bits
    assert any(np.array_equal(c.bits, truth) for c in cands)
    prof = correctness_profile(v, k64)
    assert prof.max() == 100.0
    comp = np.array([correctness(c.complement(), k64) for c in cands])
    np.testing.assert_allclose(comp, 100.0 - prof.values, atol=1e-9)
    np.testing.assert_allclose(
        correctness_profile(v, k64, fold=True).values, np.maximum(prof.values, comp), atol=1e-9
    )


def test_mean_between_class_means_at_leaks(plain64, k64):
    v = slice_slots(per_block_trace(plain64[1], block="REGFILE"))
    prof = correctness_profile(v, k64)
    m0, m1 = class_means(v, k64)
    mean = mean_slot(v)
    leaks = prof.perfect(fold=True)
    assert leaks.size
    lo, hi = np.minimum(m0, m1)[leaks], np.maximum(m0, m1)[leaks]
    assert np.all((lo < mean[leaks]) & (mean[leaks] < hi))


def test_auto_spa_constructed():
    v = slice_slots(make_trace([[1.25], [1.31], [0.95], [1.28], [0.97]]))
    (f,) = auto_spa(v, 0.5)
    assert f.threshold == pytest.approx(1.11)
    low = {i for i, b in enumerate(f.candidate.bits) if b}
    assert low == {2, 4}
    a, b = f.candidates()
    assert a.bits.tolist() == [0, 0, 1, 0, 1] and b.bits.tolist() == [1, 1, 0, 1, 0]
    # designer mode keeps it only when a polarity matches the key
    assert auto_spa(v, 0.5, key_for([1, 1, 0, 1, 0]))[0].matched == COMPLEMENT
    assert auto_spa(v, 0.5, key_for([1, 1, 0, 0, 0])) == []


def test_auto_spa_constant_and_bounds():
    v = slice_slots(make_trace(np.ones((5, 3))))
    assert auto_spa(v) == []
    with pytest.raises(AttackError):
        auto_spa(v, 0.0)
    with pytest.raises(AttackError):
        auto_spa(v, 1.5)


def test_auto_spa_subset_of_cmta_perfect(plain64, k64):
    v = slice_slots(synthesize_trace(plain64[1]))
    found = {f.sample for f in auto_spa(v, 0.5, k64)}
    assert found
    assert found <= set(correctness_profile(v, k64).perfect(fold=True).tolist())


def test_verify_candidate(k64, plain64):
    pub = reference_scalar_mul(k64.value, SECP256K1.G)
    truth = k64.processed_bits
    ok = verify_candidate(KeyCandidate(truth, 0), pub)
    assert ok and ok.polarity == DIRECT and ok.scalar == k64.value
    assert verify_candidate(KeyCandidate(1 - truth, 0), pub).polarity == COMPLEMENT
    flipped = truth.copy()
    flipped[7] ^= 1
    assert not verify_candidate(KeyCandidate(flipped, 0), pub)

    v = slice_slots(synthesize_trace(plain64[1]))
    prof = correctness_profile(v, k64)
    best = cmta_extract(v, [prof.argmax()])[0]
    assert verify_candidate(best, pub)


def test_rank_candidates_finds_key_without_it(plain64, k64):
    v = slice_slots(synthesize_trace(plain64[1]))
    pub = reference_scalar_mul(k64.value, SECP256K1.G)
    ranked = rank_candidates(v, top=5)
    assert len({c.bits.tobytes() for c in ranked}) == len(ranked)
    assert any(verify_candidate(c, pub) for c in ranked)


# -- properties --------------------------------------------------------------

int_traces = hnp.arrays(
    np.int64,
    st.tuples(st.integers(2, 12), st.integers(1, 6)),
    elements=st.integers(-1000, 1000),
)


@settings(max_examples=100)
@given(int_traces)
def test_complement_symmetry(m):
    m = m.astype(np.float64)
    bits = cmta_bits(slice_slots(make_trace(m)))
    neg = cmta_bits(slice_slots(make_trace(-m)))
    untied = m != m.mean(axis=0)
    assert np.array_equal(neg[untied], 1 - bits[untied])
    assert not neg[~untied].any()


@settings(max_examples=100)
@given(int_traces, st.integers(-10**6, 10**6), st.integers(1, 1000))
def test_offset_and_scale_invariance(m, c, s):
    m = m.astype(np.float64)
    base = cmta_bits(slice_slots(make_trace(m)))
    assert np.array_equal(cmta_bits(slice_slots(make_trace(m + c))), base)
    assert np.array_equal(cmta_bits(slice_slots(make_trace(m * s))), base)


def test_compression_consistency(rand64):
    log = rand64[1]
    coarse = synthesize_trace(log)
    fine = synthesize_trace(log, samples_per_cycle=10)
    assert np.array_equal(cmta_bits(slice_slots(compress(fine))), cmta_bits(slice_slots(coarse)))


@pytest.mark.parametrize("block", ["FSM", "CONTROLLER"])
def test_chance_floor(plain252, k252, block):
    prof = correctness_profile(slice_slots(per_block_trace(plain252[1], block=block)), k252)
    assert abs(prof.max() - 50) <= 12
