"""Matrix functions on unitaries and Hermitian operators."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionError, InputError, LogarithmError, NotHermitianError, NotUnitaryError
from .pauli import n_from_dim

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
LOG_RECONSTRUCTION_TOL = 2e-8


def unitarity_error(U) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def check_unitary(U, tol=UNITARY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {U.shape}")
    err = unitarity_error(U)
    if err > tol:
        raise NotUnitaryError(f"matrix is not unitary (max |U^dag U - I| = {err:.3e})")
    return U


def _check_hermitian(H, tol=HERMITIAN_TOL):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {H.shape}")
    err = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if err > tol:
        raise NotHermitianError(f"matrix is not Hermitian (deviation {err:.3e})")
    return H


def unitary_eig(U):
    """Eigenvalues and a unitary eigenbasis of a normal matrix.

    The complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are an orthonormal eigenbasis even inside degenerate clusters.
    """
    T, Z = scipy.linalg.schur(U, output="complex")
    return np.diag(T).copy(), Z


def principal_hamiltonian(U, T: float = 1.0) -> np.ndarray:
    """Hermitian ``H = (i/T) log U`` with every eigenphase in (-pi, pi].

    Raises LogarithmError if ``exp(-i H T)`` fails to reproduce ``U``.
    """
    if not T > 0:
        raise InputError(f"duration must be positive, got {T}")
    U = check_unitary(U)
    lam, Z = unitary_eig(U)
    theta = np.angle(lam)
    theta[theta <= -np.pi] += 2 * np.pi
    H = (Z * (-theta / T)) @ Z.conj().T
    H = 0.5 * (H + H.conj().T)
    back = (Z * np.exp(1j * theta)) @ Z.conj().T
    err = np.max(np.abs(back - U))
    if err > LOG_RECONSTRUCTION_TOL:
        raise LogarithmError(f"eigendecomposition reproduces U only to {err:.3e}")
    return H


def remove_trace(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    return H - (np.trace(H) / H.shape[0]) * np.eye(H.shape[0])


def rephase_to_su(U) -> np.ndarray:
    """Divide out ``det(U)^(1/2^n)`` (principal root) so that det = 1."""
    U = check_unitary(U)
    phase = np.angle(np.linalg.det(U)) / U.shape[0]
    return U * np.exp(-1j * phase)


def expm_hermitian(H, t: float = 1.0) -> np.ndarray:
    """``exp(-i H t)`` by Hermitian eigendecomposition."""
    H = _check_hermitian(H)
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def expm_general(M) -> np.ndarray:
    """Matrix exponential of an arbitrary square matrix (scaling and squaring, Pade)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return scipy.linalg.expm(M)


def _same_shape(U, V):
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if U.shape != V.shape or U.ndim != 2:
        raise DimensionError(f"shape mismatch {U.shape} vs {V.shape}")
    return U, V


def rms_distance(U, V) -> float:
    """``sqrt(tr((U-V)^dag (U-V)) / 4^n)``."""
    U, V = _same_shape(U, V)
    return float(np.linalg.norm(U - V) / U.shape[0])


def phase_invariant_distance(U, V) -> float:
    """``min_phi rms_distance(U, e^{i phi} V)``; the optimum is ``phi = arg tr(V^dag U)``."""
    U, V = _same_shape(U, V)
    overlap = np.vdot(V, U)
    phase = np.exp(1j * np.angle(overlap)) if overlap != 0 else 1.0
    return rms_distance(U, phase * V)


def unitary_to_json(U) -> dict:
    U = np.asarray(U, dtype=complex)
    return {
        "n": n_from_dim(U.shape[0]),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in U],
    }


def unitary_from_json(obj) -> np.ndarray:
    try:
        n = int(obj["n"])
        arr = np.array(obj["matrix"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed unitary JSON: {exc}") from exc
    if arr.ndim != 3 or arr.shape != (2**n, 2**n, 2):
        raise DimensionError(f"matrix shape {arr.shape} does not match n={n}")
    return check_unitary(arr[..., 0] + 1j * arr[..., 1], tol=1e-9)
