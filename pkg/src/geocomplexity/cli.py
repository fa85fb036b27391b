"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 bad input, 4 numerical failure.
Every command that writes a file also writes ``<file>.manifest.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import signal
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, pauli
from .continuation import (
    ContinuationConfig,
    ContinuationTrace,
    export_controls,
    resume,
    run_continuation,
    target_hash,
    verification_rows,
    write_atomic,
)
from .errors import CheckpointError, InputError, NumericalError
from .geodesic import ANALYTIC_CASES, analytic_reference, straight_line_complexity
from .matfun import rephase_to_su, unitary_from_json, unitary_to_json
from .pauli import PenaltyParams
from .targets import (
    FermionChainSpec,
    cnot_matrix,
    compile_circuit,
    fermion_block,
    naive_block_complexity,
    parse_circuit_file,
    qft_matrix,
    random_circuit,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4
VERIFY_MATCH_TOL = 1e-8


class _Run:
    """Collects inputs and outputs for the manifest."""

    def __init__(self, argv, command):
        self.argv = list(argv)
        self.command = command
        self.start = time.monotonic()
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.config: dict = {}

    def read(self, path) -> bytes:
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from exc
        self.inputs[str(path)] = hashlib.sha256(data).hexdigest()
        return data

    def write(self, path, text: str):
        write_atomic(path, text)
        self.outputs.append(str(path))

    def manifest(self, primary):
        if primary is None:
            return
        manifest = {
            "command": ["geocomplexity", *self.argv],
            "subcommand": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "version": __version__,
            "duration_s": round(time.monotonic() - self.start, 6),
            "outputs": self.outputs,
        }
        write_atomic(f"{primary}.manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _load_json(run: _Run, path):
    data = run.read(path)
    try:
        return json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _load_target(run: _Run, path) -> np.ndarray:
    return rephase_to_su(unitary_from_json(_load_json(run, path)))


def _load_trace(run: _Run, path) -> ContinuationTrace:
    data = run.read(path)
    return ContinuationTrace.loads(data.decode("utf-8", errors="replace"))


def _fmt(x) -> str:
    return repr(float(x))


def cmd_build_target(args, run: _Run):
    if args.fermion_block is None and any(v is not None for v in (args.sites, args.h, args.dt)):
        raise _Usage("--sites/--h/--dt only apply with --fermion-block")
    if args.qft is not None:
        U = qft_matrix(args.qft)
        run.config = {"qft": args.qft}
    elif args.cnot is not None:
        U = cnot_matrix(args.cnot)
        run.config = {"cnot": args.cnot}
    elif args.circuit is not None:
        U = compile_circuit(parse_circuit_file(run.read(args.circuit)))
        run.config = {"circuit": args.circuit}
    elif args.random is not None:
        n, depth, seed = args.random
        U = compile_circuit(random_circuit(n, depth, seed))
        run.config = {"random": {"n": n, "depth": depth, "seed": seed, "generator": "Philox"}}
    else:
        if args.sites is None or args.h is None or args.dt is None:
            raise _Usage("--fermion-block needs --sites, --h and --dt")
        spec = FermionChainSpec(args.sites, args.h, args.dt)
        U = fermion_block(spec, args.fermion_block)
        run.config = {"fermion_block": args.fermion_block, "sites": args.sites, "h": args.h, "dt": args.dt}
    U = rephase_to_su(U)
    run.write(args.out, json.dumps(unitary_to_json(U)) + "\n")
    print(f"wrote {args.out} (n={pauli.n_from_dim(U.shape[0])}, id={target_hash(U)[:16]})")
    return args.out


def cmd_complexity(args, run: _Run):
    U = _load_target(run, args.target)
    n = pauli.n_from_dim(U.shape[0])
    params = PenaltyParams(n, args.q)
    run.config = {"q": args.q, "straight_line": args.straight_line}
    if args.straight_line or n <= 2 or args.q == 1:
        value = straight_line_complexity(U, params)
        method = "straight-line" if args.straight_line else "exact"
    else:
        if args.trace is None:
            raise InputError(f"q={args.q} on n={n} needs a completed sweep; pass --trace")
        trace = _load_trace(run, args.trace)
        if trace.target_id != target_hash(U):
            raise CheckpointError("trace belongs to a different target (hash mismatch)")
        value = trace.record_at(args.q).complexity
        method = "trace"
    print(f"{value:.15g}")
    if args.out:
        run.write(args.out, json.dumps({"q": args.q, "complexity": value, "method": method}) + "\n")
    return args.out


def _print_row(rec):
    print(
        f"{_fmt(rec.q)} {_fmt(rec.complexity)} {_fmt(rec.boundary_error_raw)} "
        f"{_fmt(rec.boundary_error_phase_invariant)}",
        flush=True,
    )


def cmd_sweep(args, run: _Run):
    U = _load_target(run, args.target)
    n = pauli.n_from_dim(U.shape[0])
    if args.resume:
        trace = _load_trace(run, args.resume)
        if trace.target_id != target_hash(U):
            raise CheckpointError("checkpoint belongs to a different target (hash mismatch)")
        if args.q_max is not None and args.q_max != trace.config.q_max:
            raise InputError(f"--q-max {args.q_max} differs from the checkpoint's {trace.config.q_max}")
        if args.records is not None and args.records != trace.config.record_count:
            raise InputError(f"--records {args.records} differs from the checkpoint's {trace.config.record_count}")
        for rec in trace.records:
            _print_row(rec)
        trace_in = trace
    else:
        cfg = ContinuationConfig(q_max=args.q_max, record_count=args.records or 60)
        if args.abort_threshold is not None:
            cfg.abort_threshold = args.abort_threshold
        cfg = cfg.resolved(n)
        trace_in = None
    checkpoint_path = args.checkpoint or args.resume
    last_good = {"text": None}

    def on_step(trace):
        last_good["text"] = trace.dumps()
        if checkpoint_path:
            write_atomic(checkpoint_path, last_good["text"])

    def on_record(trace, rec):
        _print_row(rec)

    previous = signal.signal(signal.SIGTERM, _raise_interrupt)
    try:
        trace = run_continuation(
            U if trace_in is None else None,
            None if trace_in is not None else cfg,
            trace=trace_in,
            on_record=on_record,
            on_step=on_step,
            stop_at_q=args.stop_at_q,
        )
    except KeyboardInterrupt:
        if checkpoint_path and last_good["text"] is not None:
            write_atomic(checkpoint_path, last_good["text"])
            print(f"interrupted; checkpoint kept at {checkpoint_path}", file=sys.stderr)
        raise
    finally:
        signal.signal(signal.SIGTERM, previous)
    run.config = json.loads(json.dumps(trace.to_json()["config"]))
    if checkpoint_path:
        run.outputs.append(str(checkpoint_path))
    run.write(args.out, trace.dumps())
    if not trace.complete:
        print(f"stopped early at q={np.exp(trace.state.s):.6g}; resume with --resume", file=sys.stderr)
    return args.out


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def cmd_controls(args, run: _Run):
    trace = _load_trace(run, args.trace)
    sched = export_controls(trace, args.q)
    run.config = {"q": sched.q}
    run.write(args.out, sched.to_csv())
    print(f"wrote {args.out} ({len(sched.times)} rows, q={sched.q:.6g})")
    return args.out


def cmd_verify(args, run: _Run):
    trace = _load_trace(run, args.trace)
    rec, times, rms, inv = verification_rows(trace, args.q)
    run.config = {"q": rec.q}
    lines = ["t,rms,phase_invariant"]
    lines += [f"{t:.17g},{a:.17g},{b:.17g}" for t, a, b in zip(times, rms, inv)]
    run.write(args.out, "\n".join(lines) + "\n")
    mismatch = abs(inv[-1] - rec.boundary_error_phase_invariant)
    print(f"final phase-invariant error {inv[-1]:.6e} (trace record {rec.boundary_error_phase_invariant:.6e})")
    if mismatch > VERIFY_MATCH_TOL:
        raise NumericalError(f"re-evolved boundary error differs from the trace by {mismatch:.3e}")
    return args.out


ANALYTIC_CHOICES = (*ANALYTIC_CASES, "naive-fermion-block")


def cmd_analytic(args, run: _Run):
    if args.case == "naive-fermion-block":
        value = naive_block_complexity()
    else:
        value = analytic_reference(args.case)
    run.config = {"case": args.case}
    print(f"{value:.15f}")
    if args.out:
        run.write(args.out, json.dumps({"case": args.case, "value": value}) + "\n")
    return args.out


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geocomplexity", description="Geodesic complexity of target unitaries.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-target", help="write a target unitary (rephased to SU) as JSON")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--qft", type=int, metavar="N")
    src.add_argument("--cnot", type=int, metavar="N")
    src.add_argument("--circuit", metavar="FILE")
    src.add_argument("--random", type=int, nargs=3, metavar=("N", "DEPTH", "SEED"))
    src.add_argument("--fermion-block", type=int, choices=(1, 2))
    b.add_argument("--sites", type=int)
    b.add_argument("--h", type=float)
    b.add_argument("--dt", type=float)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_target)

    c = sub.add_parser("complexity", help="complexity of a target at one q")
    c.add_argument("--target", required=True)
    c.add_argument("--q", type=float, required=True)
    c.add_argument("--straight-line", action="store_true")
    c.add_argument("--trace", help="completed sweep to read the value from (n >= 3, q > 1)")
    c.add_argument("--out", help="optional JSON report")
    c.set_defaults(func=cmd_complexity)

    s = sub.add_parser("sweep", help="continue the geodesic from q = 1 to q-max")
    s.add_argument("--target", required=True)
    s.add_argument("--q-max", type=float, help="default 4^n - 1")
    s.add_argument("--records", type=int, help="log-spaced records (default 60)")
    s.add_argument("--out", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--resume", metavar="CK")
    s.add_argument("--abort-threshold", type=float, help="phase-invariant boundary error limit (default 5e-2)")
    s.add_argument("--stop-at-q", type=float, help="stop early, leaving a resumable checkpoint")
    s.set_defaults(func=cmd_sweep)

    for name, func, helptext in (
        ("controls", cmd_controls, "export Pauli coefficients of H(t) as CSV"),
        ("verify", cmd_verify, "distance of U(t) to the target as CSV"),
    ):
        x = sub.add_parser(name, help=helptext)
        x.add_argument("--trace", required=True)
        x.add_argument("--q", type=float, help="recorded q (default: final)")
        x.add_argument("--out", required=True)
        x.set_defaults(func=func)

    a = sub.add_parser("analytic", help="closed-form reference values")
    a.add_argument("--case", required=True, choices=ANALYTIC_CHOICES)
    a.add_argument("--out", help="optional JSON report")
    a.set_defaults(func=cmd_analytic)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(f"geocomplexity: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    run = _Run(argv, args.command)
    try:
        primary = args.func(args, run)
        run.manifest(primary)
    except _Usage as exc:
        print(f"geocomplexity: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"geocomplexity: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"geocomplexity: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        return 130
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
