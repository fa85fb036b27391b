"""Linear response of the geodesic to a change of the penalty factor.

Everything here works on column-stacked operators: ``vec(X)`` stacks the
columns of X, so ``(M kron N) vec(X) = vec(N X M^T)``. Superoperators are
dense ``4^n x 4^n`` complex matrices in that representation.

Variations K of the Hamiltonian along a family of geodesics obey
``dK/dt = i A(t) K - C(t)`` with ``A(K) = -F([K, G(H)] + [H, G(K)])``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import pauli
from .errors import IllConditionedError, InputError, ProjectionResidueError
from .geodesic import GeodesicSolution
from .matfun import expm_general
from .pauli import PenaltyParams

MAX_FLAT_N = 6
COND_LIMIT = 1e12
RESIDUE_TOL = 1e-8


def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, dim: int) -> np.ndarray:
    return np.asarray(x).reshape(dim, dim, order="F")


def thread_count() -> int:
    env = os.environ.get("QGEO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class FlatSuperOp:
    n: int
    matrix: np.ndarray

    def __matmul__(self, other):
        other = other.matrix if isinstance(other, FlatSuperOp) else other
        return self.matrix @ other


@dataclass
class JacobiPropagator:
    n: int
    T: float
    tensor: np.ndarray
    condition_estimate: float


def _all_pauli_vecs(n):
    """Columns vec(sigma_beta) for all 4^n strings, identity first."""
    t = pauli._tables(n)
    dim = t.dim
    out = np.zeros((dim * dim, 4**n), dtype=complex)
    for k in range(4**n):
        M = np.zeros((dim, dim), dtype=complex)
        M[t.rows, t.cols_full[k]] = t.values_full[k]
        out[:, k] = vec(M)
    return out


def build_flat_FG(params: PenaltyParams) -> tuple[FlatSuperOp, FlatSuperOp]:
    """Flattened F and G from the Pauli-sum eigendecomposition.

    ``G = 2^-n sum_beta g(beta) vec(sigma_beta) vec(sigma_beta)^dag`` over all
    4^n strings, identity included with g = 1; F uses ``1/g``.
    """
    n = params.n
    if n > MAX_FLAT_N:
        raise InputError(f"flattened superoperators refused for n={n} > {MAX_FLAT_N}")
    S = _all_pauli_vecs(n)
    g = np.concatenate([[1.0], params.weights])
    dim = 2**n
    G = (S * g) @ S.conj().T / dim
    F = (S / g) @ S.conj().T / dim
    return FlatSuperOp(n, F), FlatSuperOp(n, G)


def build_A(H, params: PenaltyParams, FG=None) -> np.ndarray:
    """``A = F[(I kron L - L^T kron I) + (H^T kron I - I kron H) G]`` with ``L = G(H)``."""
    H = np.asarray(H, dtype=float)
    F, G = FG if FG is not None else build_flat_FG(params)
    Hm = pauli.reconstruct(H)
    Lm = pauli.reconstruct(H * params.weights)
    eye = np.eye(Hm.shape[0])
    left = np.kron(eye, Lm) - np.kron(Lm.T, eye)
    right = np.kron(Hm.T, eye) - np.kron(eye, Hm)
    return F.matrix @ (left + right @ G.matrix)


def k_propagator(A_samples, times) -> list[np.ndarray]:
    """Ordered exponential ``T exp(i int A dt)`` on a uniform grid.

    Each factor uses A at the interval midpoint (mean of the neighbouring
    samples); later factors multiply on the left.
    """
    A_samples = list(A_samples)
    times = np.asarray(times, dtype=float)
    if len(A_samples) != len(times):
        raise InputError("need one A sample per time point")
    steps = np.diff(times)
    if len(steps) and not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise InputError("k_propagator requires a uniform time grid")
    size = A_samples[0].shape[0]

    def factor(j):
        return expm_general(1j * steps[j] * 0.5 * (A_samples[j] + A_samples[j + 1]))

    workers = min(thread_count(), max(1, len(steps)))
    if workers > 1 and size >= 64:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            factors = list(pool.map(factor, range(len(steps))))
    else:
        factors = [factor(j) for j in range(len(steps))]

    K = np.eye(size, dtype=complex)
    out = [K]
    for E in factors:
        K = E @ K
        out.append(K)
    return out


def _conjugation_maps(U_samples):
    """Flat matrices of ``X -> U^dag X U`` for each sample."""
    return [np.kron(U.T, U.conj().T) for U in U_samples]


def jacobi_propagator(solution: GeodesicSolution, params: PenaltyParams | None = None) -> JacobiPropagator:
    """``J_T = int_0^T U^dag(t) K_t(.) U(t) dt`` by the trapezoid rule."""
    params = params or solution.params
    FG = build_flat_FG(params)
    A_samples = [build_A(v, params, FG) for v in solution.H_samples]
    Ks = k_propagator(A_samples, solution.times)
    integrand = np.array([C @ K for C, K in zip(_conjugation_maps(solution.U_samples), Ks)])
    tensor = trapezoid(integrand, solution.times, axis=0)
    with np.errstate(all="ignore"):
        cond = float(np.abs(np.linalg.cond(tensor, 1)))
    if not np.isfinite(cond):
        cond = float("inf")
    return JacobiPropagator(params.n, solution.T, tensor, cond)


def invert_jacobi(jp: JacobiPropagator) -> np.ndarray:
    if not np.isfinite(jp.condition_estimate) or jp.condition_estimate > COND_LIMIT:
        raise IllConditionedError(
            f"Jacobi propagator condition estimate {jp.condition_estimate:.3e} exceeds {COND_LIMIT:.0e}"
        )
    try:
        return np.linalg.inv(jp.tensor)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"Jacobi propagator is singular: {exc}") from exc


def _to_real_traceless(X, scale: float = 1.0) -> np.ndarray:
    """Project onto traceless Hermitian coefficients, refusing large residues.

    The residue is measured relative to ``max(1, scale)``.
    """
    X = np.asarray(X)
    dim = X.shape[0]
    trace = abs(np.trace(X)) / dim
    anti = np.max(np.abs(X - X.conj().T)) / 2
    residue = max(trace, anti) / max(1.0, scale)
    if residue > RESIDUE_TOL:
        raise ProjectionResidueError(f"dH0/dq has non-Hermitian or trace residue {residue:.3e}")
    Xh = 0.5 * (X + X.conj().T)
    return pauli.decompose(Xh - np.trace(Xh) / dim * np.eye(dim), check=False)


def dH0_dq(H0, params: PenaltyParams, solution: GeodesicSolution, jp_inv=None) -> np.ndarray:
    """Rate of change of the initial Hamiltonian that keeps both endpoints fixed.

    ``solution`` must be the geodesic started from ``H0`` at ``params.q``.
    At ``q = 1`` the inhomogeneous source ``i t [P(H), Q(H)]`` is integrated
    explicitly; for ``q > 1`` the closed form
    ``(J_T^{-1}(L0) T - L0) / (q (q - 1))`` with ``L0 = G(H0)`` is used.
    """
    H0 = np.asarray(H0, dtype=float)
    n = params.n
    dim = 2**n
    if n <= 2:
        return np.zeros_like(H0)
    if jp_inv is None:
        jp_inv = invert_jacobi(jacobi_propagator(solution, params))
    q = float(params.q)
    T = solution.T
    if q == 1.0:
        Pm = pauli.reconstruct(pauli.apply_P(H0))
        Qm = pauli.reconstruct(pauli.apply_Q(H0))
        source = 1j * (Pm @ Qm - Qm @ Pm)
        integrand = np.array(
            [t * (U.conj().T @ source @ U) for t, U in zip(solution.times, solution.U_samples)]
        )
        rhs = trapezoid(integrand, solution.times, axis=0)
        X = unvec(jp_inv @ vec(rhs), dim)
    else:
        L0 = pauli.reconstruct(H0 * params.weights)
        # check the numerator; the 1/(q(q-1)) factor only rescales it
        num = unvec(jp_inv @ vec(L0), dim) * T - L0
        return _to_real_traceless(num, float(np.max(np.abs(L0)))) / (q * (q - 1.0))
    return _to_real_traceless(X)


def christoffel(a: int, b: int, d: int, params: PenaltyParams) -> float:
    """``Gamma^d_ab = i/2^(n+1) tr(F(s_d) ([s_a, G(s_b)] + [s_b, G(s_a)]))``.

    Indices are positions in the traceless basis (0-based, canonical order).
    """
    n = params.n
    basis = pauli.enumerate_basis(n)
    g = params.weights
    sa, sb, sd = (pauli.pauli_matrix(basis[i]) for i in (a, b, d))
    bracket = (sa @ sb - sb @ sa) * g[b] + (sb @ sa - sa @ sb) * g[a]
    val = 1j / 2 ** (n + 1) * np.trace(sd / g[d] @ bracket)
    if abs(val.imag) > 1e-10:
        raise ProjectionResidueError(f"Christoffel symbol has imaginary part {val.imag:.3e}")
    return float(val.real)


def christoffel_tensor(params: PenaltyParams) -> np.ndarray:
    """All ``Gamma[d, a, b]`` at once (dense; intended for n <= 4)."""
    n = params.n
    mats = np.array([pauli.pauli_matrix(p) for p in pauli.enumerate_basis(n)])
    g = params.weights
    # tr(s_d s_a s_b) for all triples
    prod = np.einsum("dij,ajk,bki->dab", mats, mats, mats)
    comm = prod - prod.transpose(0, 2, 1)  # tr(s_d [s_a, s_b])
    gam = 1j / 2 ** (n + 1) * comm * (g[None, None, :] - g[None, :, None]) / g[:, None, None]
    return gam.real
