"""Horizontal single-trace attacks on ladder power traces.

Comparison to the mean: cut the trace into slots (one per processed key
bit), average all slots sample-wise, and read bit i of candidate j as 1 when
slot i is below the mean at sample j.  Automated SPA: look for samples where
the slot values fall into two cleanly separated groups.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curve import SECP256K1, AffinePoint, reference_scalar_mul
from .ladder import Scalar
from .power import Trace

DIRECT = "direct"
COMPLEMENT = "complement"


class AttackError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SlotView:
    trace: Trace
    offset: int
    slot_len: int
    num_slots: int

    @property
    def matrix(self) -> np.ndarray:
        """(num_slots, slot_len) view into the trace samples; no copy."""
        end = self.offset + self.num_slots * self.slot_len
        return self.trace.samples[self.offset:end].reshape(self.num_slots, self.slot_len)

    def slot(self, i: int) -> np.ndarray:
        return self.matrix[i]


@dataclass(frozen=True, eq=False)
class KeyCandidate:
    bits: np.ndarray
    source: int
    polarity: str = DIRECT

    def complement(self) -> KeyCandidate:
        other = COMPLEMENT if self.polarity == DIRECT else DIRECT
        return KeyCandidate(1 - self.bits, self.source, other)

    def scalar_value(self) -> int:
        """Full scalar with the known leading 1 prepended."""
        value = 1
        for b in self.bits:
            value = (value << 1) | int(b)
        return value

    def hex(self) -> str:
        return format(self.scalar_value(), "x")


@dataclass(frozen=True, eq=False)
class CorrectnessProfile:
    values: np.ndarray

    def max(self) -> float:
        return float(self.values.max())

    def argmax(self) -> int:
        return int(self.values.argmax())

    def perfect(self, fold: bool = False) -> np.ndarray:
        hit = self.values == 100.0
        if fold:
            hit |= self.values == 0.0
        return np.flatnonzero(hit)


@dataclass(frozen=True, eq=False)
class SpaFinding:
    sample: int
    threshold: float
    gap_ratio: float
    candidate: KeyCandidate
    matched: Optional[str] = None

    def candidates(self) -> tuple[KeyCandidate, KeyCandidate]:
        return self.candidate, self.candidate.complement()


def slice_slots(
    trace: Trace,
    offset: int | None = None,
    slot_len: int | None = None,
    num_slots: int | None = None,
) -> SlotView:
    offset = trace.preamble_samples if offset is None else offset
    slot_len = trace.slot_len if slot_len is None else slot_len
    num_slots = trace.num_slots if num_slots is None else num_slots
    if offset < 0 or slot_len < 1 or num_slots < 1:
        raise AttackError("slot geometry must be positive")
    if offset + num_slots * slot_len > len(trace):
        raise AttackError(
            f"{num_slots} slots of {slot_len} samples from offset {offset} exceed trace of {len(trace)}"
        )
    return SlotView(trace, offset, slot_len, num_slots)


def mean_slot(view: SlotView) -> np.ndarray:
    return view.matrix.mean(axis=0)


def cmta_bits(view: SlotView) -> np.ndarray:
    """(num_slots, slot_len) candidate bits; ties with the mean give 0."""
    if view.num_slots < 2:
        raise AttackError("comparison to the mean needs at least two slots")
    m = view.matrix
    return (m < m.mean(axis=0)).astype(np.uint8)


def cmta_extract(view: SlotView, samples=None) -> list[KeyCandidate]:
    bits = cmta_bits(view)
    idx = range(view.slot_len) if samples is None else samples
    return [KeyCandidate(bits[:, j].copy(), int(j)) for j in idx]


def _key_bits(key: Scalar, n: int) -> np.ndarray:
    bits = key.processed_bits
    if bits.size != n:
        raise AttackError(f"candidate has {n} bits but the key processes {bits.size}")
    return bits


def correctness(candidate: KeyCandidate, key: Scalar) -> float:
    bits = _key_bits(key, candidate.bits.size)
    return 100.0 * float(np.count_nonzero(candidate.bits == bits)) / bits.size


def correctness_profile(view: SlotView, key: Scalar, fold: bool = False) -> CorrectnessProfile:
    """Correctness of every cmta candidate, one value per sample index.

    fold=True reports max(c, 100 - c), i.e. the better polarity.
    """
    kb = _key_bits(key, view.num_slots)
    match = np.count_nonzero(cmta_bits(view) == kb[:, None], axis=0)
    values = 100.0 * match / view.num_slots
    if fold:
        values = np.maximum(values, 100.0 - values)
    return CorrectnessProfile(values)


def class_means(view: SlotView, key: Scalar) -> tuple[np.ndarray, np.ndarray]:
    kb = _key_bits(key, view.num_slots)
    if kb.all() or not kb.any():
        raise AttackError("both key-bit classes must be non-empty")
    m = view.matrix
    return m[kb == 0].mean(axis=0), m[kb == 1].mean(axis=0)


def auto_spa(view: SlotView, gap_ratio_min: float = 0.5, key: Scalar | None = None) -> list[SpaFinding]:
    """Largest-gap two-cluster split of every sample column.

    A sample qualifies when its widest gap between sorted slot values is at
    least gap_ratio_min of the value spread.  Bits are 1 below the split.
    With a key, only splits that reveal it exactly (either polarity) remain.
    """
    if view.num_slots < 2:
        raise AttackError("automated SPA needs at least two slots")
    if not 0 < gap_ratio_min <= 1:
        raise AttackError("gap_ratio_min must lie in (0, 1]")
    m = view.matrix
    srt = np.sort(m, axis=0)
    gaps = np.diff(srt, axis=0)
    at = gaps.argmax(axis=0)
    cols = np.arange(m.shape[1])
    gap = gaps[at, cols]
    spread = srt[-1] - srt[0]
    ratio = np.divide(gap, spread, out=np.zeros_like(gap), where=spread > 0)
    hits = np.flatnonzero((spread > 0) & (ratio >= gap_ratio_min))
    kb = None if key is None else _key_bits(key, view.num_slots)

    out = []
    for j in hits:
        theta = 0.5 * (srt[at[j], j] + srt[at[j] + 1, j])
        bits = (m[:, j] < theta).astype(np.uint8)
        matched = None
        if kb is not None:
            if np.array_equal(bits, kb):
                matched = DIRECT
            elif np.array_equal(1 - bits, kb):
                matched = COMPLEMENT
            else:
                continue
        out.append(SpaFinding(int(j), float(theta), float(ratio[j]), KeyCandidate(bits, int(j)), matched))
    return out


@dataclass(frozen=True)
class Verification:
    ok: bool
    polarity: Optional[str] = None
    scalar: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def verify_candidate(candidate: KeyCandidate, pub: AffinePoint, G: AffinePoint | None = None) -> Verification:
    """Check '1' || bits (and its complement) against pub = k*G."""
    G = SECP256K1.G if G is None else G
    for cand in (candidate, candidate.complement()):
        k = cand.scalar_value()
        if reference_scalar_mul(k, G) == pub:
            return Verification(True, cand.polarity, k)
    return Verification(False)


def rank_candidates(view: SlotView, top: int = 10) -> list[KeyCandidate]:
    """Attacker-side ordering: distinct cmta candidates by class separation.

    Score is the distance between the two groups' means over the pooled
    standard deviation at that sample; no key knowledge is used.
    """
    bits = cmta_bits(view)
    m = view.matrix
    ones = bits.sum(axis=0)
    n = view.num_slots
    valid = (ones > 0) & (ones < n)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu1 = np.where(valid, (m * bits).sum(axis=0) / np.maximum(ones, 1), 0.0)
        mu0 = np.where(valid, (m * (1 - bits)).sum(axis=0) / np.maximum(n - ones, 1), 0.0)
        resid = m - np.where(bits == 1, mu1, mu0)
        sd = np.sqrt((resid**2).sum(axis=0) / n)
        score = np.where(valid, np.abs(mu0 - mu1) / (sd + 1e-12), -np.inf)
    out, seen = [], set()
    for j in np.argsort(-score, kind="stable"):
        if not np.isfinite(score[j]) or len(out) >= top:
            break
        key = bits[:, j].tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(KeyCandidate(bits[:, j].copy(), int(j)))
    return out
