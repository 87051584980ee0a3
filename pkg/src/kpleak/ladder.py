"""Cycle-level model of the balanced ladder coprocessor.

Both ladder designs run on one datapath: a register file, a modular ALU, an
FSM, a controller translating FSM steps into control words, and the loop
counter.  One field operation takes one clock cycle.  Every cycle appends
events to the log; the power model turns those into samples.

Register map (addresses are fixed; see README for the table):

    0-2    R0.X R0.Y R0.Z     ladder point R0 / Q0   (formula inputs)
    3-5    R1.X R1.Y R1.Z     ladder point R1 / Q1   (formula inputs)
    6-10   t0 .. t4           formula temporaries
    11-13  T0.X T0.Y T0.Z     ladder result T0 (formula outputs)
    14-16  T1.X T1.Y T1.Z     ladder result T1 (formula outputs)

Slot layout (72 cycles): first point operation (33), second point operation
(33), copy-back (6).  The copy-back moves the sum point first, then the
doubled point.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .curve import SECP256K1, CurveParams, ProjectivePoint


class LadderError(ValueError):
    pass


class Unit(str, enum.Enum):
    REGFILE = "REGFILE"
    MMALU = "MMALU"
    FSM = "FSM"
    CONTROLLER = "CONTROLLER"
    COUNTER = "COUNTER"


UNITS: tuple[Unit, ...] = tuple(Unit)


class Kind(str, enum.Enum):
    READ = "READ"
    WRITE = "WRITE"
    ALU_ADD = "ALU_ADD"
    ALU_SUB = "ALU_SUB"
    ALU_MUL = "ALU_MUL"
    CTRL = "CTRL"


class Event(NamedTuple):
    cycle: int
    unit: Unit
    kind: Kind
    address: int | None = None
    old_value: int | None = None
    new_value: int | None = None


# -- register file -----------------------------------------------------------

POINT_ADDITION_REGISTERS = 11
NUM_REGISTERS = 17

POINT_BASE = {"R0": 0, "R1": 3, "T0": 11, "T1": 14}
TEMP_BASE = 6

REGISTER_NAMES: tuple[str, ...] = (
    "R0.X", "R0.Y", "R0.Z",
    "R1.X", "R1.Y", "R1.Z",
    "t0", "t1", "t2", "t3", "t4",
    "T0.X", "T0.Y", "T0.Z",
    "T1.X", "T1.Y", "T1.Z",
)


class OpKind(str, enum.Enum):
    ADD = "ADD"
    DOUBLE = "DOUBLE"


# Complete addition (a = 0) as a register-transfer program.  Operands name
# formula registers; "b3" is the hard-wired constant 3b (one register read).
COMPLETE_ADD_PROGRAM: tuple[tuple[str, str, str, str], ...] = (
    ("mul", "t0", "X1", "X2"),
    ("mul", "t1", "Y1", "Y2"),
    ("mul", "t2", "Z1", "Z2"),
    ("add", "t3", "X1", "Y1"),
    ("add", "t4", "X2", "Y2"),
    ("mul", "t3", "t3", "t4"),
    ("add", "t4", "t0", "t1"),
    ("sub", "t3", "t3", "t4"),
    ("add", "t4", "Y1", "Z1"),
    ("add", "X3", "Y2", "Z2"),
    ("mul", "t4", "t4", "X3"),
    ("add", "X3", "t1", "t2"),
    ("sub", "t4", "t4", "X3"),
    ("add", "X3", "X1", "Z1"),
    ("add", "Y3", "X2", "Z2"),
    ("mul", "X3", "X3", "Y3"),
    ("add", "Y3", "t0", "t2"),
    ("sub", "Y3", "X3", "Y3"),
    ("add", "X3", "t0", "t0"),
    ("add", "t0", "X3", "t0"),
    ("mul", "t2", "b3", "t2"),
    ("add", "Z3", "t1", "t2"),
    ("sub", "t1", "t1", "t2"),
    ("mul", "Y3", "b3", "Y3"),
    ("mul", "X3", "t4", "Y3"),
    ("mul", "t2", "t3", "t1"),
    ("sub", "X3", "t2", "X3"),
    ("mul", "Y3", "Y3", "t0"),
    ("mul", "t1", "t1", "Z3"),
    ("add", "Y3", "t1", "Y3"),
    ("mul", "t0", "t0", "t3"),
    ("mul", "Z3", "Z3", "t4"),
    ("add", "Z3", "Z3", "t0"),
)

L_OP = len(COMPLETE_ADD_PROGRAM)
L_COPYBACK = 6
CYCLES_PER_SLOT = 2 * L_OP + L_COPYBACK

_ALU_KIND = {"add": Kind.ALU_ADD, "sub": Kind.ALU_SUB, "mul": Kind.ALU_MUL}
_OPCODE = {"add": 1, "sub": 2, "mul": 4, "mov": 8, "ld": 16}

# FSM phases; the state word is (phase << 6) | step and never depends on data
PHASE_LOAD, PHASE_INIT, PHASE_OP1, PHASE_OP2, PHASE_COPY = 1, 2, 3, 4, 5


def _bind(a: str, b: str, dst: str) -> dict[str, int]:
    ba, bb, bd = POINT_BASE[a], POINT_BASE[b], POINT_BASE[dst]
    binding = {
        "X1": ba, "Y1": ba + 1, "Z1": ba + 2,
        "X2": bb, "Y2": bb + 1, "Z2": bb + 2,
        "X3": bd, "Y3": bd + 1, "Z3": bd + 2,
    }
    for k in range(5):
        binding[f"t{k}"] = TEMP_BASE + k
    return binding


class Datapath:
    """Register file + ALU + control, clocked one field operation at a time."""

    def __init__(self, curve: CurveParams = SECP256K1, record: bool = True):
        self.curve = curve
        self.record = record
        self.regs = [0] * NUM_REGISTERS
        self.alu = 0
        self.cycle = 0
        self.fsm = 0
        self.ctrl = 0
        self.counter = 0
        self.counter_next = 0
        self.events: list[Event] = []

    def set_point(self, role: str, pt: ProjectivePoint) -> None:
        base = POINT_BASE[role]
        self.regs[base:base + 3] = [pt.X, pt.Y, pt.Z]

    def get_point(self, role: str) -> ProjectivePoint:
        base = POINT_BASE[role]
        return ProjectivePoint(*self.regs[base:base + 3])

    def _control(self, phase: int, step: int, opcode: int) -> None:
        if self.record:
            c, ev = self.cycle, self.events
            fsm = (phase << 6) | step
            ctrl = (opcode << 6) | step
            ev.append(Event(c, Unit.FSM, Kind.CTRL, None, self.fsm, fsm))
            ev.append(Event(c, Unit.CONTROLLER, Kind.CTRL, None, self.ctrl, ctrl))
            ev.append(Event(c, Unit.COUNTER, Kind.CTRL, None, self.counter, self.counter_next))
            self.fsm, self.ctrl = fsm, ctrl
        self.counter = self.counter_next
        self.cycle += 1

    def _write(self, addr: int, value: int) -> None:
        if self.record:
            self.events.append(Event(self.cycle, Unit.REGFILE, Kind.WRITE, addr, self.regs[addr], value))
        self.regs[addr] = value

    def _read(self, addr: int) -> int:
        if self.record:
            self.events.append(Event(self.cycle, Unit.REGFILE, Kind.READ, addr))
        return self.regs[addr]

    def load(self, addr: int, value: int, step: int) -> None:
        self._write(addr, value)
        self._control(PHASE_LOAD, step, _OPCODE["ld"])

    def move(self, dst: int, src: int, phase: int, step: int) -> None:
        self._write(dst, self._read(src))
        self._control(phase, step, _OPCODE["mov"])

    def point_op(self, a: str, b: str, dst: str, phase: int) -> None:
        """Run the complete-addition program on points a, b into dst."""
        binding = _bind(a, b, dst)
        p, b3 = self.curve.p, self.curve.b3
        for step, (op, out, x, y) in enumerate(COMPLETE_ADD_PROGRAM):
            u = b3 if x == "b3" else self._read(binding[x])
            v = self._read(binding[y])
            if op == "add":
                res = (u + v) % p
            elif op == "sub":
                res = (u - v) % p
            else:
                res = (u * v) % p
            if self.record:
                self.events.append(Event(self.cycle, Unit.MMALU, _ALU_KIND[op], None, self.alu, res))
            self.alu = res
            self._write(binding[out], res)
            self._control(phase, step, _OPCODE[op])


# -- scalars -----------------------------------------------------------------

@dataclass(frozen=True)
class Scalar:
    """Key k = k_{l-1} ... k_0 with k_{l-1} = 1."""

    value: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1 or self.value >> (self.length - 1) != 1:
            raise LadderError("scalar must have its most significant bit set (k_{l-1} = 1)")

    @classmethod
    def from_int(cls, value: int) -> Scalar:
        if value <= 0:
            raise LadderError("scalar must be positive")
        return cls(value, value.bit_length())

    @classmethod
    def from_hex(cls, text: str) -> Scalar:
        s = text.strip().lower()
        if s.startswith("0x"):
            s = s[2:]
        try:
            value = int(s, 16)
        except ValueError:
            raise LadderError(f"invalid hex scalar: {text!r}") from None
        if value == 0:
            raise LadderError("scalar must have its most significant bit set (k_{l-1} = 1)")
        return cls(value, value.bit_length())

    @classmethod
    def from_bits(cls, bits: str) -> Scalar:
        if not bits or set(bits) - {"0", "1"}:
            raise LadderError(f"invalid bit string: {bits!r}")
        return cls(int(bits, 2), len(bits))

    def bit(self, i: int) -> int:
        return (self.value >> i) & 1

    @property
    def processed_bits(self) -> np.ndarray:
        """Bits in slot order: k_{l-2}, ..., k_0."""
        return np.array([self.bit(i) for i in range(self.length - 2, -1, -1)], dtype=np.uint8)

    def hex(self) -> str:
        return format(self.value, "x")


@dataclass(frozen=True)
class RandomBits:
    """Random bits r_{t-2} ... r_0; bits[i] is r_i."""

    bits: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    @classmethod
    def zeros(cls, length: int) -> RandomBits:
        return cls((0,) * length)

    @classmethod
    def from_int(cls, value: int, length: int) -> RandomBits:
        """r_i = bit i of value; bits at positions >= length are dropped."""
        return cls(tuple((value >> i) & 1 for i in range(length)))

    @classmethod
    def from_hex(cls, text: str, length: int) -> RandomBits:
        s = text.strip().lower().removeprefix("0x")
        try:
            return cls.from_int(int(s, 16), length)
        except ValueError:
            raise LadderError(f"invalid hex random number: {text!r}") from None

    @classmethod
    def random(cls, length: int, seed: int) -> RandomBits:
        rng = random.Random(seed)
        return cls.from_int(rng.getrandbits(length) if length else 0, length)


# -- event log ---------------------------------------------------------------

@dataclass(frozen=True)
class EventLog:
    events: tuple[Event, ...]
    cycles_per_slot: int
    preamble_cycles: int
    num_slots: int
    design: str = "plain"

    @property
    def total_cycles(self) -> int:
        return self.preamble_cycles + self.num_slots * self.cycles_per_slot

    @cached_property
    def _slot_bounds(self) -> np.ndarray:
        cycles = np.fromiter((e.cycle for e in self.events), dtype=np.int64, count=len(self.events))
        edges = self.preamble_cycles + self.cycles_per_slot * np.arange(self.num_slots + 1)
        return np.searchsorted(cycles, edges, side="left")

    def slot_events(self, s: int) -> tuple[Event, ...]:
        if not 0 <= s < self.num_slots:
            raise IndexError(s)
        lo, hi = self._slot_bounds[s], self._slot_bounds[s + 1]
        return self.events[lo:hi]

    def slot_signature(self, s: int) -> tuple[tuple[int, Unit, Kind], ...]:
        """(cycle-in-slot, unit, kind) sequence; addresses and data excluded."""
        start = self.preamble_cycles + s * self.cycles_per_slot
        return tuple((e.cycle - start, e.unit, e.kind) for e in self.slot_events(s))

    def slot_addresses(self, s: int) -> tuple[int, ...]:
        return tuple(e.address for e in self.slot_events(s) if e.unit is Unit.REGFILE)

    @cached_property
    def features(self) -> dict[str, np.ndarray]:
        """Per-event arrays consumed by the power model."""
        n = len(self.events)
        cycle = np.empty(n, dtype=np.int64)
        unit = np.empty(n, dtype=np.int8)
        hd = np.zeros(n, dtype=np.float64)
        hw = np.zeros(n, dtype=np.float64)
        addr = np.full(n, -1, dtype=np.int64)
        unit_index = {u: i for i, u in enumerate(UNITS)}
        for idx, e in enumerate(self.events):
            cycle[idx] = e.cycle
            unit[idx] = unit_index[e.unit]
            if e.new_value is not None:
                hw[idx] = e.new_value.bit_count()
                hd[idx] = (e.old_value ^ e.new_value).bit_count()
            if e.unit is Unit.REGFILE and e.kind is Kind.WRITE:
                addr[idx] = e.address
        return {"cycle": cycle, "unit": unit, "hd": hd, "hw": hw, "addr": addr}


def slot_geometry(log: EventLog) -> tuple[int, int, int]:
    return log.preamble_cycles, log.cycles_per_slot, log.num_slots


# -- ladders -----------------------------------------------------------------

def schedule_point_op(
    kind: OpKind | str,
    dst: str,
    points: dict[str, ProjectivePoint],
    src: str = "R0",
    curve: CurveParams = SECP256K1,
) -> list[Event]:
    """Events of one point operation on a datapath preloaded with `points`.

    ADD always combines R0 and R1; DOUBLE uses `src` for both operands.
    """
    kind = OpKind(kind)
    if dst not in ("T0", "T1"):
        raise LadderError(f"point operations write T0 or T1, not {dst!r}")
    dp = Datapath(curve)
    for role, pt in points.items():
        dp.set_point(role, pt)
    if kind is OpKind.ADD:
        dp.point_op("R0", "R1", dst, PHASE_OP1)
    else:
        if src not in ("R0", "R1"):
            raise LadderError(f"doubling reads R0 or R1, not {src!r}")
        dp.point_op(src, src, dst, PHASE_OP1)
    return dp.events


def _run(
    k: Scalar,
    r: RandomBits,
    P: ProjectivePoint,
    design: str,
    record: bool,
    curve: CurveParams,
) -> tuple[ProjectivePoint, EventLog]:
    if P.is_identity or not P.on_curve(curve):
        raise LadderError("base point must be a non-identity point on the curve")
    l = k.length
    dp = Datapath(curve, record)

    # preamble: load P into R0, R1 <- 2P
    dp.counter = dp.counter_next = l - 1
    for j, v in enumerate(P.coords()):
        dp.load(POINT_BASE["R0"] + j, v, j)
    dp.point_op("R0", "R0", "T1", PHASE_INIT)
    for j in range(3):
        dp.move(POINT_BASE["R1"] + j, POINT_BASE["T1"] + j, PHASE_COPY, 3 + j)
    preamble = dp.cycle

    for i in range(l - 2, -1, -1):
        m_i, r_i = k.bit(i), r[i]
        dp.counter_next = i
        add = ("R0", "R1", "T0" if m_i else "T1")
        dbl = ("R1", "R1", "T1") if m_i else ("R0", "R0", "T0")
        first, second = (add, dbl) if r_i == 0 else (dbl, add)
        dp.point_op(*first, PHASE_OP1)
        dp.point_op(*second, PHASE_OP2)
        sum_t = add[2]
        for step, t in enumerate((sum_t, "T1" if sum_t == "T0" else "T0")):
            rdst = "R" + t[1]
            for j in range(3):
                dp.move(POINT_BASE[rdst] + j, POINT_BASE[t] + j, PHASE_COPY, 3 * step + j)

    log = EventLog(tuple(dp.events), CYCLES_PER_SLOT, preamble, l - 1, design)
    return dp.get_point("R0"), log


def montgomery_ladder(
    k: Scalar, P: ProjectivePoint, *, record: bool = True, curve: CurveParams = SECP256K1
) -> tuple[ProjectivePoint, EventLog]:
    """Plain ladder: per bit, the addition runs first, then the doubling."""
    return _run(k, RandomBits.zeros(k.length - 1), P, "plain", record, curve)


def randomized_ladder(
    m: Scalar,
    r: RandomBits,
    P: ProjectivePoint,
    *,
    record: bool = True,
    curve: CurveParams = SECP256K1,
) -> tuple[ProjectivePoint, EventLog]:
    """Ladder whose per-bit operation order is picked by r_i."""
    if len(r) != m.length - 1:
        raise LadderError(f"need {m.length - 1} random bits, got {len(r)}")
    return _run(m, r, P, "randomized", record, curve)


def run_design(
    design: str, k: Scalar, P: ProjectivePoint, r: RandomBits | None = None, *, record: bool = True
) -> tuple[ProjectivePoint, EventLog]:
    if design == "plain":
        return montgomery_ladder(k, P, record=record)
    if design == "randomized":
        if r is None:
            raise LadderError("randomized design needs random bits")
        return randomized_ladder(k, r, P, record=record)
    raise LadderError(f"unknown design {design!r}")


def op_sequence(log: EventLog, slot: int) -> Sequence[str]:
    """Which point operation occupies each half of a slot (from write targets)."""
    events = log.slot_events(slot)
    start = log.preamble_cycles + slot * log.cycles_per_slot
    out = []
    for half in range(2):
        lo, hi = start + half * L_OP, start + (half + 1) * L_OP
        reads = [e.address for e in events if lo <= e.cycle < hi and e.kind is Kind.READ]
        # first cycle reads X1 and X2: equal addresses only when doubling
        out.append("DOUBLE" if reads[0] == reads[1] else "ADD")
    return out
