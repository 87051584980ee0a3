"""Command-line experiment runner.

Exit codes: 0 success, 2 usage, 3 ran but found/verified nothing,
4 I/O error, 5 trace format error, 6 precondition violation.
"""
from __future__ import annotations

import csv
import io
import logging
import sys
from functools import wraps

import click

from . import attacks
from .curve import SECP256K1, AffinePoint, reference_scalar_mul
from .experiments import (
    BLOCKS,
    DESIGNS,
    REFERENCE_SCALAR_HEX,
    ExperimentConfig,
    block_study,
    simulate,
)
from .ladder import LadderError, Scalar
from .power import PowerModelError
from .tracefile import TraceFormatError, atomic_write_bytes, read_trace, write_trace

EXIT_OK = 0
EXIT_NOTHING = 3
EXIT_IO = 4
EXIT_FORMAT = 5
EXIT_PRECONDITION = 6

log = logging.getLogger("kpleak")


def _guard(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TraceFormatError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_FORMAT)
        except (LadderError, PowerModelError, attacks.AttackError, ValueError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_PRECONDITION)
        except OSError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _parse_weights(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.BadParameter("expected hd,hw,addr")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise click.BadParameter("weights must be numbers") from None


def _parse_pub(text: str) -> AffinePoint:
    """Accept 'x,y' (hex) or an uncompressed SEC1 string '04' || x || y."""
    s = text.strip().lower()
    try:
        if "," in s:
            x, y = (int(v.strip().removeprefix("0x"), 16) for v in s.split(","))
        elif s.startswith("04") and len(s) == 130:
            x, y = int(s[2:66], 16), int(s[66:], 16)
        else:
            raise ValueError
    except ValueError:
        raise LadderError(f"cannot parse public key {text!r}") from None
    pt = AffinePoint(x, y)
    if not pt.on_curve():
        raise LadderError("public key is not on secp256k1")
    return pt


def _emit(out: str | None, text: str) -> None:
    if out in (None, "-"):
        click.echo(text, nl=False)
    else:
        atomic_write_bytes(out, [text.encode()])


def _csv_text(comments: list[str], header: list[str], rows) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _view(trace_path: str, offset, slot_len, num_slots=None):
    trace = read_trace(trace_path)
    return trace, attacks.slice_slots(trace, offset, slot_len, num_slots)


def config_options(fn):
    opts = [
        click.option("--design", type=click.Choice(DESIGNS), default="plain", show_default=True),
        click.option("--scalar", "scalar_hex", default=REFERENCE_SCALAR_HEX, show_default=True, help="Scalar m in hex."),
        click.option("--rand", "rand_hex", default=None, help="Random number r in hex; drawn from --seed if omitted."),
        click.option("--spc", type=int, default=1, show_default=True, help="Samples per clock cycle."),
        click.option("--sigma", type=float, default=0.0, show_default=True, help="Gaussian noise per sample."),
        click.option("--seed", type=int, default=0, show_default=True, help="Seed for r bits and noise."),
        click.option("--weights", default="1,0.2,0.5", show_default=True, help="Leakage weights hd,hw,addr."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config(design, scalar_hex, rand_hex, spc, sigma, seed, weights, block="TOP") -> ExperimentConfig:
    return ExperimentConfig(
        design=design,
        scalar_hex=scalar_hex,
        rand_hex=rand_hex,
        samples_per_cycle=spc,
        sigma=sigma,
        seed=seed,
        block=block,
        weights=_parse_weights(weights),
    )


@click.group(context_settings={"show_default": True})
@click.option("--loglevel", default="WARNING", help="Logging level.")
def cli(loglevel):
    """Simulate ladder power traces and run horizontal attacks on them."""
    logging.basicConfig(level=loglevel.upper(), format="%(levelname)s %(name)s: %(message)s")


@cli.command("simulate")
@config_options
@click.option("--block", type=click.Choice(BLOCKS), default="TOP")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output KPT1 trace file.")
@_guard
def simulate_cmd(design, scalar_hex, rand_hex, spc, sigma, seed, weights, block, out):
    """Run kP on the ladder model and write the power trace."""
    config = _config(design, scalar_hex, rand_hex, spc, sigma, seed, weights, block)
    sim = simulate(config)
    trace = sim.trace()
    write_trace(out, trace)
    res = sim.result_affine
    for line in config.header_lines():
        click.echo(f"# {line}")
    click.echo(f"result.x=0x{res.x:064x}")
    click.echo(f"result.y=0x{res.y:064x}")
    click.echo(
        f"scalar_bits={config.scalar.length} slots={trace.num_slots} "
        f"cycles_per_slot={trace.cycles_per_slot} preamble_cycles={trace.preamble_cycles} "
        f"samples={len(trace)}"
    )


@cli.command("attack-cmta")
@click.argument("trace_path", type=click.Path(dir_okay=False))
@click.option("--key", default=None, help="Known scalar (hex): designer mode, emits the correctness profile.")
@click.option("--pub", default=None, help="Public key 'x,y' hex: attacker mode verifies candidates.")
@click.option("--top", type=int, default=10, help="Candidates listed in attacker mode.")
@click.option("--fold", is_flag=True, help="Report max(c, 100-c) instead of direct polarity.")
@click.option("--offset", type=int, default=None, help="First sample of slot 0.")
@click.option("--slot-len", type=int, default=None, help="Samples per slot.")
@click.option("--out", default=None, help="Output CSV (stdout if omitted).")
@_guard
def attack_cmta(trace_path, key, pub, top, fold, offset, slot_len, out):
    """Comparison-to-the-mean attack on a single trace."""
    trace, view = _view(trace_path, offset, slot_len)
    comments = [f"trace={trace_path}", f"slots={view.num_slots}", f"slot_len={view.slot_len}"]
    if key is not None:
        k = Scalar.from_hex(key)
        prof = attacks.correctness_profile(view, k, fold=fold)
        rows = ((j, f"{v:.1f}") for j, v in enumerate(prof.values))
        _emit(out, _csv_text(comments + [f"max={prof.max():.1f}"], ["sample_index", "correctness_percent"], rows))
        return
    cands = attacks.rank_candidates(view, top)
    pub_pt = _parse_pub(pub) if pub else None
    rows, found = [], None
    for rank, c in enumerate(cands):
        status = ""
        if pub_pt is not None:
            v = attacks.verify_candidate(c, pub_pt)
            status = v.polarity if v else "no"
            if v and found is None:
                found = v.scalar
        rows.append((rank, c.source, c.hex(), c.complement().hex(), status))
    _emit(out, _csv_text(comments, ["rank", "sample_index", "candidate_hex", "complement_hex", "verified"], rows))
    if pub_pt is not None:
        if found is None:
            click.echo("no candidate verified", err=True)
            sys.exit(EXIT_NOTHING)
        click.echo(f"verified scalar: 0x{found:x}", err=True)


@cli.command("attack-spa")
@click.argument("trace_path", type=click.Path(dir_okay=False))
@click.option("--gap-ratio", type=float, default=0.5)
@click.option("--key", default=None, help="Known scalar (hex): keep only findings that reveal it.")
@click.option("--offset", type=int, default=None)
@click.option("--slot-len", type=int, default=None)
@click.option("--out", default=None, help="Findings CSV (stdout if omitted).")
@click.option("--dump-slots", type=int, default=0, help="Dump the first finding's sample for this many slots.")
@click.option("--dump-out", default=None, help="CSV for --dump-slots.")
@_guard
def attack_spa(trace_path, gap_ratio, key, offset, slot_len, out, dump_slots, dump_out):
    """Automated SPA: samples where slots split into two separated groups."""
    trace, view = _view(trace_path, offset, slot_len)
    k = Scalar.from_hex(key) if key else None
    findings = attacks.auto_spa(view, gap_ratio, k)
    rows = [(f.sample, repr(f.threshold), f"{f.gap_ratio:.6f}", f.matched or "", f.candidate.hex()) for f in findings]
    comments = [f"trace={trace_path}", f"gap_ratio_min={gap_ratio:g}", f"mode={'designer' if k else 'attacker'}"]
    _emit(out, _csv_text(comments, ["sample_index", "threshold", "gap_ratio", "polarity", "candidate_hex"], rows))
    if findings and dump_slots > 0:
        j = findings[0].sample
        n = min(dump_slots, view.num_slots)
        vals = view.matrix[:n, j]
        bits = k.processed_bits[:n] if k else [""] * n
        dump = _csv_text(
            [f"trace={trace_path}", f"sample_index={j}"],
            ["slot", "key_bit", "power"],
            ((i, b if b == "" else int(b), repr(float(v))) for i, (b, v) in enumerate(zip(bits, vals))),
        )
        _emit(dump_out, dump)
    if not findings:
        click.echo("no findings", err=True)
        sys.exit(EXIT_NOTHING)


@cli.command("block-study")
@config_options
@click.option("--threshold", type=float, default=100.0)
@click.option("--fold", is_flag=True, help="Score the better polarity.")
@click.option("--out", default=None, help="Output CSV (stdout if omitted).")
@_guard
def block_study_cmd(design, scalar_hex, rand_hex, spc, sigma, seed, weights, threshold, fold, out):
    """Attack every design block separately and tabulate the leakage."""
    config = _config(design, scalar_hex, rand_hex, spc, sigma, seed, weights)
    rows = block_study(config, threshold, fold)
    text = _csv_text(
        config.header_lines() + [f"threshold={threshold:g}"],
        ["block", "max_correctness", "best_sample", "cycles_at_threshold"],
        ((r.block, f"{r.max_correctness:.1f}", r.best_sample, " ".join(map(str, r.cycles))) for r in rows),
    )
    _emit(out, text)


@cli.command()
@click.option("--key", required=True, help="Candidate scalar (hex).")
@click.option("--pub", required=True, help="Public key 'x,y' hex or uncompressed SEC1.")
@_guard
def verify(key, pub):
    """Check key * G == pub."""
    k = Scalar.from_hex(key)
    ok = reference_scalar_mul(k.value, SECP256K1.G) == _parse_pub(pub)
    click.echo("match" if ok else "mismatch")
    if not ok:
        sys.exit(EXIT_NOTHING)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
