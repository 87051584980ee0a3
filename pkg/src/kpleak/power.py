"""Synthetic power traces from a ladder event log.

Per-cycle power is a weighted sum over that cycle's events:
Hamming distance of the transition, Hamming weight of the new value, and,
for register-file writes, a per-address decoder coefficient.  Fine sampling
spreads each cycle's power over a fixed intra-cycle pulse whose mean is 1,
so averaging a noiseless fine trace per cycle gives the coarse trace back.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ladder import NUM_REGISTERS, UNITS, EventLog, Unit

# Event contributions are snapped to this grid and the pulse template to
# 2**-8, so c * template[s] and the per-cycle sums stay exact in float64
# (cycle power below 2**20, samples_per_cycle up to 1024).
POWER_QUANTUM = 2.0**-12
TEMPLATE_QUANTUM = 2.0**-8

ADDR_COEFF_STEP = 512.0
TOP = "TOP"


class PowerModelError(ValueError):
    pass


def default_addr_coeff(seed: int = 2020, n: int = NUM_REGISTERS) -> tuple[float, ...]:
    """Pairwise distinct decoder coefficients: a seeded shuffle of evenly spaced levels."""
    levels = ADDR_COEFF_STEP * np.arange(1, n + 1, dtype=np.float64)
    return tuple(float(v) for v in np.random.default_rng(seed).permutation(levels))


@dataclass(frozen=True)
class LeakageModel:
    w_hd: float = 1.0
    w_hw: float = 0.2
    w_addr: float = 0.5
    addr_coeff: tuple[float, ...] = field(default_factory=default_addr_coeff)
    unit_mask: frozenset[Unit] = frozenset(UNITS)
    baseline: float = 1.0

    def __post_init__(self) -> None:
        if min(self.w_hd, self.w_hw, self.w_addr) < 0:
            raise PowerModelError("leakage weights must be non-negative")
        if len(set(self.addr_coeff)) != len(self.addr_coeff):
            raise PowerModelError("address coefficients must be pairwise distinct")
        if len(self.addr_coeff) < NUM_REGISTERS:
            raise PowerModelError(f"need {NUM_REGISTERS} address coefficients")
        object.__setattr__(self, "unit_mask", frozenset(Unit(u) for u in self.unit_mask))

    def with_units(self, units) -> LeakageModel:
        return replace(self, unit_mask=frozenset(units))


@dataclass(frozen=True, eq=False)
class Trace:
    samples: np.ndarray
    samples_per_cycle: int
    cycles_per_slot: int
    num_slots: int
    preamble_cycles: int

    def __post_init__(self) -> None:
        if self.samples_per_cycle < 1:
            raise PowerModelError("samples_per_cycle must be >= 1")
        expected = self.samples_per_cycle * (self.preamble_cycles + self.num_slots * self.cycles_per_slot)
        if self.samples.ndim != 1 or self.samples.size != expected:
            raise PowerModelError(f"trace holds {self.samples.size} samples, geometry needs {expected}")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def slot_len(self) -> int:
        return self.cycles_per_slot * self.samples_per_cycle

    @property
    def preamble_samples(self) -> int:
        return self.preamble_cycles * self.samples_per_cycle

    def geometry(self) -> tuple[int, int, int, int]:
        return self.samples_per_cycle, self.cycles_per_slot, self.num_slots, self.preamble_cycles

    def with_samples(self, samples: np.ndarray) -> Trace:
        return replace(self, samples=samples)


def _quantize(x):
    return np.round(np.asarray(x, dtype=np.float64) / POWER_QUANTUM) * POWER_QUANTUM


def cycle_template(samples_per_cycle: int) -> np.ndarray:
    """Decaying-exponential pulse, non-negative, mean exactly 1."""
    if samples_per_cycle < 1:
        raise PowerModelError("samples_per_cycle must be >= 1")
    if samples_per_cycle == 1:
        return np.ones(1)
    s = np.arange(samples_per_cycle, dtype=np.float64)
    shape = np.exp(-4.0 * s / samples_per_cycle)
    t = np.floor(shape * samples_per_cycle / shape.sum() / TEMPLATE_QUANTUM) * TEMPLATE_QUANTUM
    t[0] += samples_per_cycle - t.sum()
    return t


def cycle_power(log: EventLog, model: LeakageModel) -> np.ndarray:
    f = log.features
    mask = np.isin(f["unit"], [UNITS.index(u) for u in model.unit_mask])
    contrib = model.w_hd * f["hd"] + model.w_hw * f["hw"]
    writes = f["addr"] >= 0
    coeff = np.asarray(model.addr_coeff, dtype=np.float64)
    contrib = contrib + np.where(writes, model.w_addr * coeff[np.where(writes, f["addr"], 0)], 0.0)
    contrib = _quantize(np.where(mask, contrib, 0.0))
    power = np.bincount(f["cycle"], weights=contrib, minlength=log.total_cycles)[: log.total_cycles]
    return power + _quantize(model.baseline)


def gaussian_noise(n: int, sigma: float, seed: int, stream: int = 0) -> np.ndarray:
    # Philox is counter-based: any chunking of the stream reproduces it exactly
    gen = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream]))
    return sigma * gen.standard_normal(n)


def synthesize_trace(
    log: EventLog,
    model: LeakageModel | None = None,
    samples_per_cycle: int = 1,
    sigma: float = 0.0,
    seed: int = 0,
) -> Trace:
    if samples_per_cycle < 1:
        raise PowerModelError("samples_per_cycle must be >= 1")
    if sigma < 0:
        raise PowerModelError("sigma must be >= 0")
    model = model or LeakageModel()
    power = cycle_power(log, model)
    samples = np.outer(power, cycle_template(samples_per_cycle)).ravel()
    if sigma > 0:
        samples = samples + gaussian_noise(samples.size, sigma, seed)
    return Trace(samples, samples_per_cycle, log.cycles_per_slot, log.num_slots, log.preamble_cycles)


def per_block_trace(
    log: EventLog,
    model: LeakageModel | None = None,
    block: str = TOP,
    samples_per_cycle: int = 1,
    sigma: float = 0.0,
    seed: int = 0,
) -> Trace:
    model = model or LeakageModel()
    if block == TOP:
        units = UNITS
    else:
        try:
            units = (Unit(block),)
        except ValueError:
            raise PowerModelError(f"unknown block {block!r}") from None
    return synthesize_trace(log, model.with_units(units), samples_per_cycle, sigma, seed)


def compress(trace: Trace) -> Trace:
    """Per-cycle arithmetic mean of a finely sampled trace."""
    spc = trace.samples_per_cycle
    coarse = trace.samples.reshape(-1, spc).mean(axis=1)
    return Trace(coarse, 1, trace.cycles_per_slot, trace.num_slots, trace.preamble_cycles)


def selective_noise(trace: Trace, cycles, sigma: float, seed: int = 0) -> Trace:
    """Add Gaussian noise at the given intra-slot cycles of every slot."""
    cycles = sorted({int(c) for c in cycles})
    for c in cycles:
        if not 0 <= c < trace.cycles_per_slot:
            raise PowerModelError(f"cycle {c} outside slot of {trace.cycles_per_slot} cycles")
    if not cycles or sigma == 0:
        return trace
    spc = trace.samples_per_cycle
    cols = (np.asarray(cycles)[:, None] * spc + np.arange(spc)).ravel()
    samples = trace.samples.copy()
    view = samples[trace.preamble_samples:].reshape(trace.num_slots, trace.slot_len)
    view[:, cols] += gaussian_noise(view[:, cols].size, sigma, seed, stream=1).reshape(trace.num_slots, cols.size)
    return trace.with_samples(samples)
