import random

import pytest

from kpleak.curve import SECP256K1, ProjectivePoint
from kpleak.experiments import REFERENCE_RANDOM_HEX, REFERENCE_SCALAR_HEX
from kpleak.ladder import RandomBits, Scalar, montgomery_ladder, randomized_ladder

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def seeded_scalar(bits: int, seed: int) -> Scalar:
    rng = random.Random(seed)
    return Scalar.from_int(rng.getrandbits(bits - 1) | (1 << (bits - 1)))


@pytest.fixture(scope="session")
def G():
    return ProjectivePoint.from_affine(SECP256K1.G)


@pytest.fixture(scope="session")
def k64():
    return seeded_scalar(64, 64)


@pytest.fixture(scope="session")
def k252():
    return seeded_scalar(252, 252)


@pytest.fixture(scope="session")
def ref_scalar():
    return Scalar.from_hex(REFERENCE_SCALAR_HEX)


@pytest.fixture(scope="session")
def ref_r(ref_scalar):
    return RandomBits.from_hex(REFERENCE_RANDOM_HEX, ref_scalar.length - 1)


@pytest.fixture(scope="session")
def plain64(k64, G):
    return montgomery_ladder(k64, G)


@pytest.fixture(scope="session")
def rand64(k64, G):
    return randomized_ladder(k64, RandomBits.random(63, 5), G)


@pytest.fixture(scope="session")
def plain252(k252, G):
    return montgomery_ladder(k252, G)


@pytest.fixture(scope="session")
def rand252(k252, G):
    return randomized_ladder(k252, RandomBits.random(251, 6), G)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0][2:])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
