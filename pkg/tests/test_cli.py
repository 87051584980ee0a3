import csv
import io

import pytest
from click.testing import CliRunner

from kpleak.cli import cli
from kpleak.curve import SECP256K1, reference_scalar_mul

from .conftest import seeded_scalar

K = seeded_scalar(64, 64)
PUB = reference_scalar_mul(K.value, SECP256K1.G)
PUB_ARG = f"{PUB.x:x},{PUB.y:x}"


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args, code=0):
        res = runner.invoke(cli, [str(a) for a in args])
        assert res.exit_code == code, res.output + str(res.exception)
        return res

    return invoke


def rows(text):
    return list(csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#")))))


def sim(run, path, *extra):
    return run("simulate", "--scalar", K.hex(), "--out", path, *extra)


def test_simulate_deterministic(run, tmp_path):
    a, b = tmp_path / "a.kpt", tmp_path / "b.kpt"
    out_a = sim(run, a, "--design", "randomized", "--spc", 4, "--sigma", 0.3, "--seed", 9).output
    out_b = sim(run, b, "--design", "randomized", "--spc", 4, "--sigma", 0.3, "--seed", 9).output
    assert a.read_bytes() == b.read_bytes()
    assert out_a == out_b
    assert f"result.x=0x{PUB.x:064x}" in out_a
    assert "slots=63" in out_a


def test_designs_agree_on_result(run, tmp_path):
    plain = sim(run, tmp_path / "p.kpt").output
    rnd = sim(run, tmp_path / "r.kpt", "--design", "randomized", "--rand", "deadbeef").output
    pick = lambda o: [l for l in o.splitlines() if l.startswith("result.")]
    assert pick(plain) == pick(rnd)


def test_designer_profile_csv(run, tmp_path):
    path = tmp_path / "t.kpt"
    sim(run, path)
    out = run("attack-cmta", path, "--key", K.hex()).output
    table = rows(out)
    assert len(table) == 72
    assert any(r["correctness_percent"] == "100.0" for r in table)
    csv_path = tmp_path / "p.csv"
    run("attack-cmta", path, "--key", K.hex(), "--out", csv_path)
    assert csv_path.read_text() == out


def test_attacker_mode_verifies(run, tmp_path):
    path = tmp_path / "t.kpt"
    sim(run, path)
    res = run("attack-cmta", path, "--pub", PUB_ARG, "--top", 5)
    assert f"verified scalar: 0x{K.value:x}" in res.output


def test_attacker_mode_nothing_verified(run, tmp_path):
    path = tmp_path / "t.kpt"
    sim(run, path, "--block", "FSM")
    run("attack-cmta", path, "--pub", PUB_ARG, "--top", 3, code=3)


def test_randomized_regfile_leaks_at_copy_back(run, tmp_path):
    path = tmp_path / "t.kpt"
    sim(run, path, "--design", "randomized", "--block", "REGFILE")
    table = rows(run("attack-cmta", path, "--key", K.hex()).output)
    full = {int(r["sample_index"]) for r in table if r["correctness_percent"] == "100.0"}
    assert full and min(full) >= 66


def test_spa_findings_and_dump(run, tmp_path):
    path = tmp_path / "t.kpt"
    sim(run, path)
    dump = tmp_path / "d.csv"
    out = run("attack-spa", path, "--key", K.hex(), "--dump-slots", 50, "--dump-out", dump).output
    findings = rows(out)
    assert findings and all(f["polarity"] in ("direct", "complement") for f in findings)
    d = rows(dump.read_text())
    assert len(d) == 50
    lo = {float(r["power"]) for r in d if r["key_bit"] == "1"}
    hi = {float(r["power"]) for r in d if r["key_bit"] == "0"}
    assert max(lo) < min(hi) or max(hi) < min(lo)


def test_spa_nothing_on_zero_weights(run, tmp_path):
    path = tmp_path / "t.kpt"
    sim(run, path, "--weights", "0,0,0")
    run("attack-spa", path, code=3)


def test_block_study(run, tmp_path):
    out = run("block-study", "--scalar", K.hex(), "--fold").output
    table = {r["block"]: r for r in rows(out)}
    assert list(table) == ["TOP", "REGFILE", "MMALU", "FSM", "CONTROLLER", "COUNTER"]
    assert table["REGFILE"]["max_correctness"] == "100.0"
    for b in ("FSM", "CONTROLLER"):
        assert float(table[b]["max_correctness"]) < 62
    top = set(table["TOP"]["cycles_at_threshold"].split())
    assert set(table["REGFILE"]["cycles_at_threshold"].split()) <= top
    again = run("block-study", "--scalar", K.hex(), "--fold").output
    assert again == out


def test_verify(run):
    assert run("verify", "--key", K.hex(), "--pub", PUB_ARG).output.strip() == "match"
    sec1 = f"04{PUB.x:064x}{PUB.y:064x}"
    run("verify", "--key", K.hex(), "--pub", sec1)
    run("verify", "--key", format(K.value ^ 1, "x"), "--pub", PUB_ARG, code=3)


def test_exit_codes(run, tmp_path):
    run("attack-cmta", tmp_path / "missing.kpt", "--key", "ab", code=4)
    bad = tmp_path / "bad.kpt"
    bad.write_bytes(b"NOPE" + bytes(64))
    run("attack-cmta", bad, "--key", "ab", code=5)
    run("simulate", "--scalar", "xyz", "--out", tmp_path / "x.kpt", code=6)
    run("simulate", "--scalar", "0", "--out", tmp_path / "x.kpt", code=6)
    run("verify", "--key", "ab", "--pub", "1,2", code=6)
    run("simulate", "--design", "nope", "--out", tmp_path / "x.kpt", code=2)
    path = tmp_path / "t.kpt"
    sim(run, path)
    run("attack-cmta", path, "--key", "abc", code=6)  # wrong length
