"""Continuation of the boundary-value geodesic in the penalty factor q.

Starting from the straight-line solution at q = 1, the initial Hamiltonian
H0(q) is integrated as an ODE in s = ln q with right-hand side
``q * dH0/dq``. The stepper is an embedded Dormand-Prince 5(4) pair whose
whole state (s, H0, proposed step) lives in the trace, so a run can be
checkpointed and resumed with bit-identical results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import pauli
from .errors import BoundaryAbortError, CheckpointError, InputError, IntegrationError
from .geodesic import (
    ATOL as GEO_ATOL,
    DEFAULT_NT,
    RTOL as GEO_RTOL,
    GeodesicSolution,
    evolve_geodesic,
    straight_line_hamiltonian,
)
from .jacobi import dH0_dq
from .matfun import check_unitary, rephase_to_su, unitary_from_json, unitary_to_json
from .pauli import PenaltyParams

SCHEMA_VERSION = 1

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = np.array(
    [71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)  # fifth minus fourth order weights


@dataclass
class ContinuationConfig:
    q_max: float | None = None  # None -> 4^n - 1
    n_t: int = DEFAULT_NT
    record_count: int = 60
    rtol: float = 1e-6
    atol: float = 1e-8
    geodesic_rtol: float = GEO_RTOL
    geodesic_atol: float = GEO_ATOL
    abort_threshold: float = 5e-2
    first_step: float = 0.05
    max_steps: int = 10000

    def __post_init__(self):
        if self.q_max is not None and not self.q_max >= 1:
            raise InputError(f"q_max must be >= 1, got {self.q_max}")
        if self.record_count < 2:
            raise InputError(f"record_count must be >= 2, got {self.record_count}")
        if self.n_t < 2:
            raise InputError(f"n_t must be >= 2, got {self.n_t}")

    def resolved(self, n: int) -> "ContinuationConfig":
        if self.q_max is not None:
            return self
        d = asdict(self)
        d["q_max"] = float(4**n - 1)
        return ContinuationConfig(**d)

    def record_qs(self) -> np.ndarray:
        if self.q_max == 1:
            return np.array([1.0])
        qs = np.exp(np.linspace(0.0, np.log(self.q_max), self.record_count))
        qs[0], qs[-1] = 1.0, float(self.q_max)
        return qs


@dataclass
class ContinuationRecord:
    q: float
    H0: np.ndarray
    complexity: float
    boundary_error_raw: float
    boundary_error_phase_invariant: float

    def to_json(self) -> dict:
        return {
            "q": float(self.q),
            "H0": [float(x) for x in self.H0],
            "complexity": float(self.complexity),
            "boundary_error_raw": float(self.boundary_error_raw),
            "boundary_error_phase_invariant": float(self.boundary_error_phase_invariant),
        }

    @classmethod
    def from_json(cls, obj) -> "ContinuationRecord":
        return cls(
            float(obj["q"]),
            np.array(obj["H0"], dtype=float),
            float(obj["complexity"]),
            float(obj["boundary_error_raw"]),
            float(obj["boundary_error_phase_invariant"]),
        )


@dataclass
class IntegratorState:
    s: float
    H0: np.ndarray
    h: float
    next_record: int
    steps: int = 0
    done: bool = False

    def to_json(self) -> dict:
        return {
            "s": float(self.s),
            "H0": [float(x) for x in self.H0],
            "h": float(self.h),
            "next_record": int(self.next_record),
            "steps": int(self.steps),
            "done": bool(self.done),
        }

    @classmethod
    def from_json(cls, obj) -> "IntegratorState":
        return cls(
            float(obj["s"]),
            np.array(obj["H0"], dtype=float),
            float(obj["h"]),
            int(obj["next_record"]),
            int(obj.get("steps", 0)),
            bool(obj.get("done", False)),
        )


@dataclass
class ContinuationTrace:
    target_id: str
    n: int
    target: np.ndarray  # rephased into SU(2^n)
    config: ContinuationConfig
    records: list[ContinuationRecord] = field(default_factory=list)
    state: IntegratorState | None = None

    @property
    def q_values(self) -> np.ndarray:
        return np.array([r.q for r in self.records])

    @property
    def complexities(self) -> np.ndarray:
        return np.array([r.complexity for r in self.records])

    @property
    def final(self) -> ContinuationRecord:
        return self.records[-1]

    @property
    def complete(self) -> bool:
        return self.state is not None and self.state.done

    def record_at(self, q: float | None = None) -> ContinuationRecord:
        if not self.records:
            raise InputError("trace has no records")
        if q is None:
            return self.final
        for r in self.records:
            if abs(r.q - q) <= 1e-9 * max(1.0, abs(q)):
                return r
        raise InputError(f"q={q} is not a recorded value; recorded: {[r.q for r in self.records]}")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "target_id": self.target_id,
            "n": self.n,
            "target": unitary_to_json(self.target),
            "config": asdict(self.config),
            "records": [r.to_json() for r in self.records],
            "state": self.state.to_json() if self.state is not None else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, obj) -> "ContinuationTrace":
        try:
            version = obj["schema_version"]
            if version != SCHEMA_VERSION:
                raise CheckpointError(f"unsupported trace schema version {version!r}")
            target = unitary_from_json(obj["target"])
            trace = cls(
                target_id=str(obj["target_id"]),
                n=int(obj["n"]),
                target=target,
                config=ContinuationConfig(**obj["config"]),
                records=[ContinuationRecord.from_json(r) for r in obj["records"]],
                state=IntegratorState.from_json(obj["state"]) if obj.get("state") else None,
            )
        except CheckpointError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"malformed trace file: {exc}") from exc
        if target_hash(trace.target) != trace.target_id:
            raise CheckpointError("trace target does not match its recorded hash")
        return trace

    @classmethod
    def loads(cls, text: str) -> "ContinuationTrace":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"trace file is not valid JSON: {exc}") from exc
        return cls.from_json(obj)


def target_hash(U_su) -> str:
    """SHA-256 over the little-endian complex128 bytes of the rephased target."""
    data = np.ascontiguousarray(np.asarray(U_su), dtype="<c16").tobytes()
    return hashlib.sha256(data).hexdigest()


def initialize_base(U_T) -> np.ndarray:
    """q = 1 initial Hamiltonian: traceless principal log of the rephased target.

    Among the phase-equivalent SU representatives the one with the shortest
    straight line is used (see ``straight_line_hamiltonian``).
    """
    return straight_line_hamiltonian(check_unitary(U_T, tol=1e-9))


class _Rhs:
    """``q dH0/dq`` as a function of s = ln q, caching the last geodesic."""

    def __init__(self, n, config, target):
        self.n = n
        self.config = config
        self.target = target
        self._last = None
        qs = config.record_qs()
        self.exact_q = dict(zip(np.log(qs).tolist(), qs.tolist()))

    def q_of(self, s) -> float:
        if s == 0.0:
            return 1.0
        return self.exact_q.get(float(s), float(np.exp(s)))

    def geodesic(self, s, H0) -> GeodesicSolution:
        key = (float(s), H0.tobytes())
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        q = self.q_of(s)
        sol = evolve_geodesic(
            H0,
            PenaltyParams(self.n, q),
            self.config.n_t,
            self.target,
            rtol=self.config.geodesic_rtol,
            atol=self.config.geodesic_atol,
        )
        self._last = (key, sol)
        return sol

    def __call__(self, s, H0):
        if self.n <= 2:
            return np.zeros_like(H0)  # no penalized strings: dH0/dq vanishes
        sol = self.geodesic(s, H0)
        q = sol.params.q
        return q * dH0_dq(H0, sol.params, sol)


def _dp_step(f, s, y, f0, h):
    k = [f0]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(f(s + _C[i] * h, yi))
    y_new = y + h * sum(b * kj for b, kj in zip(_B[:6], k[:6]))
    err = h * sum(e * kj for e, kj in zip(_E, k))
    return y_new, k[6], err


def _make_record(sol: GeodesicSolution) -> ContinuationRecord:
    return ContinuationRecord(
        q=float(sol.params.q),
        H0=sol.H0.copy(),
        complexity=float(sol.complexity),
        boundary_error_raw=float(sol.boundary_error_raw),
        boundary_error_phase_invariant=float(sol.boundary_error),
    )


def start_trace(U_T, config: ContinuationConfig | None = None) -> ContinuationTrace:
    U_T = check_unitary(U_T, tol=1e-9)
    n = pauli.n_from_dim(U_T.shape[0])
    config = (config or ContinuationConfig()).resolved(n)
    U_su = rephase_to_su(U_T)
    H0 = initialize_base(U_su)
    state = IntegratorState(s=0.0, H0=H0, h=float(config.first_step), next_record=0)
    return ContinuationTrace(target_hash(U_su), n, U_su, config, [], state)


def run_continuation(
    U_T=None,
    config: ContinuationConfig | None = None,
    *,
    trace: ContinuationTrace | None = None,
    on_record=None,
    on_step=None,
    stop_at_q: float | None = None,
) -> ContinuationTrace:
    """Sweep q from 1 to ``config.q_max`` recording log-spaced snapshots.

    Pass ``trace`` (e.g. from ``resume``) to continue an interrupted run.
    ``on_record(trace, record)`` fires for every new record and
    ``on_step(trace)`` after every accepted step; both see a consistent
    trace suitable for checkpointing. ``stop_at_q`` ends the run early, leaving
    a resumable trace.
    """
    if trace is None:
        if U_T is None:
            raise InputError("need a target unitary or a trace to resume")
        trace = start_trace(U_T, config)
    elif U_T is not None and target_hash(rephase_to_su(U_T)) != trace.target_id:
        raise CheckpointError("target does not match the checkpoint (hash mismatch)")
    cfg = trace.config
    state = trace.state
    if state is None or state.done:
        return trace

    rhs = _Rhs(trace.n, cfg, trace.target)
    record_s = np.log(cfg.record_qs())
    s_end = float(record_s[-1])
    s_stop = np.inf if stop_at_q is None else float(np.log(stop_at_q))

    def take_record():
        sol = rhs.geodesic(state.s, state.H0)
        rec = _make_record(sol)
        if rec.boundary_error_phase_invariant > cfg.abort_threshold:
            raise BoundaryAbortError(
                f"boundary error {rec.boundary_error_phase_invariant:.3e} at q={rec.q:.6g} "
                f"exceeds abort threshold {cfg.abort_threshold:.1e}"
            )
        trace.records.append(rec)
        state.next_record += 1
        if on_record is not None:
            on_record(trace, rec)

    if state.next_record == 0 and state.s == 0.0:
        take_record()
    if state.next_record >= len(record_s):
        state.done = True
        if on_step is not None:
            on_step(trace)
        return trace

    f0 = rhs(state.s, state.H0)
    while state.s < s_end and state.s < s_stop:
        if state.steps >= cfg.max_steps:
            raise IntegrationError(f"continuation exceeded {cfg.max_steps} steps")
        s_target = float(record_s[state.next_record])
        h = min(state.h, s_target - state.s)
        clipped = h < state.h
        if h <= 1e-14 * max(1.0, abs(state.s)):
            raise IntegrationError(f"continuation step size underflow at q={np.exp(state.s):.6g}")
        y_new, f_new, err = _dp_step(rhs, state.s, state.H0, f0, h)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(state.H0), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.isfinite(err_norm):
            raise IntegrationError("non-finite error estimate in continuation")
        if err_norm > 1.0:
            state.h = h * max(0.2, 0.9 * err_norm ** -0.2)
            continue
        factor = 10.0 if err_norm == 0 else min(10.0, max(0.2, 0.9 * err_norm ** -0.2))
        s_new = state.s + h
        if clipped:
            s_new = s_target
            if s_new != state.s + h:
                # recompute the end derivative at the exact record abscissa
                f_new = rhs(s_new, y_new)
        state.s, state.H0, f0 = s_new, y_new, f_new
        state.h = max(h * factor, state.h) if clipped else h * factor
        state.steps += 1
        if state.s == s_target:
            take_record()
            if state.next_record >= len(record_s):
                state.done = True
        if on_step is not None:
            on_step(trace)
    return trace


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def checkpoint(trace: ContinuationTrace, path) -> None:
    write_atomic(path, trace.dumps())


def resume(path) -> ContinuationTrace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return ContinuationTrace.loads(text)


@dataclass
class ControlSchedule:
    """Pauli coefficients of H(t) on the time grid; the drive amplitudes."""

    q: float
    times: np.ndarray
    labels: list[str]
    penalized: np.ndarray  # bool per label, weight >= 3
    values: np.ndarray  # (n_t, 4^n - 1)

    def column_names(self) -> list[str]:
        return [("Q:" + lab) if pen else lab for lab, pen in zip(self.labels, self.penalized)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.column_names()])
        for t, row in zip(self.times, self.values):
            w.writerow([f"{t:.17g}", *(f"{x:.17g}" for x in row)])
        return buf.getvalue()


def _solution_at(trace: ContinuationTrace, q):
    rec = trace.record_at(q)
    cfg = trace.config
    sol = evolve_geodesic(
        rec.H0,
        PenaltyParams(trace.n, rec.q),
        cfg.n_t,
        trace.target,
        rtol=cfg.geodesic_rtol,
        atol=cfg.geodesic_atol,
    )
    return rec, sol


def export_controls(trace: ContinuationTrace, q: float | None = None) -> ControlSchedule:
    rec, sol = _solution_at(trace, q)
    return ControlSchedule(
        q=rec.q,
        times=sol.times,
        labels=pauli.basis_labels(trace.n),
        penalized=pauli.pauli_weights(trace.n) > 2,
        values=sol.H_samples,
    )


def verification_rows(trace: ContinuationTrace, q: float | None = None):
    """Distance of U(t) to the target along the geodesic at ``q``.

    Returns ``(record, times, rms, phase_invariant)``.
    """
    from .matfun import phase_invariant_distance, rms_distance

    rec, sol = _solution_at(trace, q)
    rms = np.array([rms_distance(U, trace.target) for U in sol.U_samples])
    inv = np.array([phase_invariant_distance(U, trace.target) for U in sol.U_samples])
    return rec, sol.times, rms, inv
