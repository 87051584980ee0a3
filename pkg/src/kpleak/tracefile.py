"""KPT1 trace container.

Layout (little-endian):

    offset  size  field
    0       4     magic b"KPT1"
    4       4     format version (uint32, = 1)
    8       8     num_samples (uint64)
    16      4     samples_per_cycle (uint32)
    20      4     cycles_per_slot (uint32)
    24      4     num_slots (uint32)
    28      8     preamble_samples (uint64)
    36      ...   num_samples float64 samples
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .power import Trace

MAGIC = b"KPT1"
VERSION = 1
HEADER = struct.Struct("<4sIQIIIQ")


class TraceFormatError(ValueError):
    pass


def atomic_write_bytes(path: str | os.PathLike, chunks) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            for chunk in chunks:
                fh.write(chunk)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_header(trace: Trace) -> bytes:
    return HEADER.pack(
        MAGIC,
        VERSION,
        len(trace),
        trace.samples_per_cycle,
        trace.cycles_per_slot,
        trace.num_slots,
        trace.preamble_samples,
    )


def write_trace(path: str | os.PathLike, trace: Trace) -> None:
    payload = np.ascontiguousarray(trace.samples, dtype="<f8")
    atomic_write_bytes(path, (encode_header(trace), payload.tobytes()))


def decode_header(raw: bytes) -> dict:
    if len(raw) < HEADER.size:
        raise TraceFormatError("file too short for a KPT1 header")
    magic, version, n, spc, cps, slots, pre = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TraceFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TraceFormatError(f"unsupported format version {version}")
    if spc < 1 or pre % spc:
        raise TraceFormatError("preamble is not a whole number of cycles")
    if n != spc * (pre // spc + slots * cps):
        raise TraceFormatError("declared geometry does not match num_samples")
    return {
        "num_samples": n,
        "samples_per_cycle": spc,
        "cycles_per_slot": cps,
        "num_slots": slots,
        "preamble_samples": pre,
    }


def read_trace(path: str | os.PathLike, mmap: bool = False) -> Trace:
    """Read a KPT1 file; mmap=True maps the samples instead of loading them."""
    with open(path, "rb") as fh:
        hdr = decode_header(fh.read(HEADER.size))
        size = os.fstat(fh.fileno()).st_size
    n = hdr["num_samples"]
    if size != HEADER.size + 8 * n:
        raise TraceFormatError(f"payload holds {(size - HEADER.size) / 8:g} samples, header declares {n}")
    if mmap:
        samples = np.memmap(path, dtype="<f8", mode="r", offset=HEADER.size, shape=(n,))
    else:
        samples = np.fromfile(path, dtype="<f8", offset=HEADER.size, count=n).astype(np.float64)
    spc = hdr["samples_per_cycle"]
    return Trace(
        samples,
        spc,
        hdr["cycles_per_slot"],
        hdr["num_slots"],
        hdr["preamble_samples"] // spc,
    )
