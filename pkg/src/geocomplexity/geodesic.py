"""Schroedinger-geodesic integration, complexity functional and reference values.

The state is a pair (V, U): V holds the real Pauli coefficients of the
Hamiltonian (Hermitian by construction) and U is the dense propagator.
With hbar = 1 the system reads

    dU/dt = -i H U
    dH/dt = -i F([H, G(H)])

and is integrated on t in [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from . import pauli
from .errors import (
    InputError,
    IntegrationError,
    SpeedConservationError,
    UnitarityDriftError,
)
from .matfun import (
    check_unitary,
    phase_invariant_distance,
    principal_hamiltonian,
    remove_trace,
    rephase_to_su,
    rms_distance,
    unitarity_error,
)
from .pauli import PenaltyParams

T_FINAL = 1.0
DEFAULT_NT = 201
RTOL = 1e-8
ATOL = 1e-10
UNITARITY_DRIFT_TOL = 1e-6
SPEED_TOL = 1e-4


@dataclass
class GeodesicSolution:
    params: PenaltyParams
    times: np.ndarray
    H_samples: np.ndarray  # (n_t, 4^n - 1)
    U_samples: np.ndarray  # (n_t, 2^n, 2^n)
    complexity: float = float("nan")
    boundary_error: float | None = None
    boundary_error_raw: float | None = None
    T: float = field(default=T_FINAL)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def H0(self) -> np.ndarray:
        return self.H_samples[0]

    @property
    def U_final(self) -> np.ndarray:
        return self.U_samples[-1]

    def speeds(self) -> np.ndarray:
        """Metric speed ``<H(t), H(t)>^(1/2)`` at each sample."""
        sq = np.einsum("ti,i,ti->t", self.H_samples, self.params.weights, self.H_samples)
        return np.sqrt(np.maximum(sq, 0.0))

    def to_json(self, include_unitaries: bool = False) -> dict:
        out = {
            "params": {"n": self.params.n, "q": float(self.params.q)},
            "T": self.T,
            "times": [float(t) for t in self.times],
            "H_samples": [[float(x) for x in row] for row in self.H_samples],
            "complexity": float(self.complexity),
            "boundary_error": self.boundary_error,
            "boundary_error_raw": self.boundary_error_raw,
        }
        if include_unitaries:
            out["U_samples"] = [
                [[[float(z.real), float(z.imag)] for z in row] for row in U] for U in self.U_samples
            ]
        return out

    def dumps(self, include_unitaries: bool = False) -> str:
        return json.dumps(self.to_json(include_unitaries), sort_keys=True)


def geodesic_rhs(H, U, params: PenaltyParams):
    """Time derivatives ``(dU, dV)`` of the geodesic system.

    ``H`` is a coefficient vector; the returned ``dV`` is the (real)
    coefficient vector of ``-i F([H, G(H)])``.
    """
    Hm = pauli.reconstruct(H)
    Lm = pauli.reconstruct(H * params.weights)
    dU = -1j * (Hm @ U)
    comm = Hm @ Lm - Lm @ Hm
    dV = pauli.decompose(-1j * comm) / params.weights
    return dU, dV


def _pack(v, U):
    return np.concatenate([v, U.reshape(-1).view(float)])


def _unpack(y, nv, dim):
    return y[:nv], y[nv:].view(complex).reshape(dim, dim)


def _integrate(rhs, y0, times, rtol, atol):
    sol = solve_ivp(rhs, (times[0], times[-1]), y0, method="RK45", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")
    return sol


def propagate(hamiltonian, n: int, n_t: int = DEFAULT_NT, *, rtol: float = RTOL, atol: float = ATOL):
    """Solve ``dU/dt = -i H(t) U`` from ``U(0) = I`` for a prescribed ``H(t)``.

    ``hamiltonian(t)`` returns a coefficient vector. Returns ``(times, U_samples)``.
    """
    dim = 2**n
    times = np.linspace(0.0, T_FINAL, n_t)

    def rhs(t, y):
        U = y.view(complex).reshape(dim, dim)
        return (-1j * (pauli.reconstruct(hamiltonian(t)) @ U)).reshape(-1).view(float)

    y0 = np.eye(dim, dtype=complex).reshape(-1).view(float).copy()
    sol = _integrate(rhs, y0, times, rtol, atol)
    return times, sol.y.T.copy().view(complex).reshape(n_t, dim, dim)


def evolve_geodesic(
    H0,
    params: PenaltyParams,
    n_t: int = DEFAULT_NT,
    target=None,
    *,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> GeodesicSolution:
    """Integrate the geodesic from ``U(0) = I`` with initial Hamiltonian ``H0``.

    Uses the Dormand-Prince 5(4) pair with dense output sampled at ``n_t``
    uniform points on [0, 1]. Unitarity of U is monitored, never restored.
    If ``target`` is given, boundary errors against it are filled in.
    """
    H0 = np.asarray(H0, dtype=float)
    if pauli.n_from_coeffs(H0) != params.n:
        raise InputError("H0 does not match the qubit count in params")
    if n_t < 2:
        raise InputError(f"need at least two time samples, got {n_t}")
    nv = H0.size
    dim = 2**params.n
    times = np.linspace(0.0, T_FINAL, n_t)

    if params.q == 1 or params.n <= 2:
        # dH/dt vanishes identically; keep H exactly constant
        def rhs(t, y):
            v, U = _unpack(y, nv, dim)
            dU = -1j * (pauli.reconstruct(v) @ U)
            return np.concatenate([np.zeros(nv), dU.reshape(-1).view(float)])
    else:
        def rhs(t, y):
            v, U = _unpack(y, nv, dim)
            dU, dV = geodesic_rhs(v, U, params)
            return np.concatenate([dV, dU.reshape(-1).view(float)])

    y0 = _pack(H0, np.eye(dim, dtype=complex))
    sol = _integrate(rhs, y0, times, rtol, atol)
    H_samples = sol.y[:nv].T.copy()
    U_samples = sol.y[nv:].T.copy().view(complex).reshape(n_t, dim, dim)
    drift = max(unitarity_error(U) for U in U_samples)
    if drift > UNITARITY_DRIFT_TOL:
        raise UnitarityDriftError(f"unitarity drift {drift:.3e} exceeds {UNITARITY_DRIFT_TOL}")
    solution = GeodesicSolution(params, times, H_samples, U_samples)
    solution.complexity = complexity_of(solution)
    if target is not None:
        target = check_unitary(target, tol=1e-9)
        solution.boundary_error = phase_invariant_distance(solution.U_final, target)
        solution.boundary_error_raw = rms_distance(solution.U_final, target)
    return solution


def complexity_of(solution: GeodesicSolution) -> float:
    """Path length by the trapezoid rule over the samples.

    Cross-checked against the constant-speed value ``|H(0)| T``; a relative
    disagreement above 1e-4 means the path is not a geodesic.
    """
    speeds = solution.speeds()
    length = float(trapezoid(speeds, solution.times))
    constant = float(speeds[0] * solution.T)
    scale = max(abs(constant), 1e-300)
    if constant == 0.0:
        if length != 0.0:
            raise SpeedConservationError("zero initial speed but nonzero path length")
        return 0.0
    if abs(length - constant) / scale > SPEED_TOL:
        raise SpeedConservationError(
            f"trapezoid length {length:.10g} disagrees with constant-speed value {constant:.10g}"
        )
    return length


def straight_line_hamiltonian(U_T) -> np.ndarray:
    """Traceless principal Hamiltonian of the cheapest phase-equivalent target.

    ``U_T`` is first brought into SU(2^n). The 2^n elements ``U e^{2 pi i k / 2^n}``
    share the same physical action; each gets the principal logarithm with its
    trace removed, and the one of smallest unpenalized norm is returned
    (lowest ``k`` on ties). Result is a coefficient vector.
    """
    U = rephase_to_su(U_T)
    dim = U.shape[0]
    best, best_norm = None, np.inf
    for k in range(dim):
        Hk = remove_trace(principal_hamiltonian(U * np.exp(2j * np.pi * k / dim)))
        v = pauli.decompose(Hk)
        norm = float(np.dot(v, v))
        if norm < best_norm - 1e-12:
            best, best_norm = v, norm
    return best


def straight_line_complexity(U_T, params: PenaltyParams) -> float:
    """Penalized length of the constant-Hamiltonian path to ``U_T``.

    Equals ``sqrt(-tr(log U G(log U)) / 2^n)`` for the logarithm picked by
    ``straight_line_hamiltonian``. Exact complexity for n <= 2, an upper
    reference for larger n.
    """
    v = straight_line_hamiltonian(U_T)
    if pauli.n_from_coeffs(v) != params.n:
        raise InputError("target does not match the qubit count in params")
    return pauli.metric_norm(v, params)


ANALYTIC_CASES = ("qft1", "qft2", "cnot")


def analytic_reference(case: str) -> float:
    """Closed-form complexities of small targets.

    qft1: principal Hamiltonian has eigenvalues +-pi/2, so C = pi/2.
    qft2: traceless Hamiltonian eigenvalues (3, 3, -5, -1) pi/8, C = sqrt(11) pi/8.
    cnot: eigenvalues (1, 1, 1, -3) pi/4, C = sqrt(3) pi/4.
    """
    values = {
        "qft1": np.pi / 2,
        "qft2": np.sqrt(11) * np.pi / 8,
        "cnot": np.sqrt(3) * np.pi / 4,
    }
    try:
        return float(values[case])
    except KeyError:
        raise InputError(f"unknown analytic case {case!r}; expected one of {ANALYTIC_CASES}") from None
