"""Pauli-string basis of su(2^n) and the penalty superoperators.

Operators are handled in two interchangeable forms: dense ``2^n x 2^n``
complex matrices and real coefficient vectors of length ``4^n - 1`` over
the traceless Pauli basis in canonical order (base-4 digits I=0, X=1, Y=2,
Z=3, site 0 most significant, identity excluded).

Qubit/site 0 is the leftmost Kronecker factor. Labels are written with
``1`` for the identity (``1XZ``); ``I`` is accepted on input.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NotHermitianError, NotTracelessError

N_MAX = 6
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10

SYMBOLS = "IXYZ"
_LABEL_OUT = "1XYZ"

PAULI_1Q = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# entry of the single-site matrix in row b (column is b ^ flip)
_SITE_VALUE = np.array([[1, 1], [1, 1], [-1j, 1j], [1, -1]], dtype=complex)
_SITE_FLIP = np.array([0, 1, 1, 0])


@dataclass(frozen=True)
class PauliString:
    symbols: str

    def __post_init__(self):
        s = self.symbols.upper().replace("1", "I")
        if not s or any(c not in SYMBOLS for c in s):
            raise InputError(f"invalid Pauli string {self.symbols!r}")
        object.__setattr__(self, "symbols", s)

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        if not 0 <= index < 4**n:
            raise InputError(f"index {index} out of range for n={n}")
        digits = []
        for _ in range(n):
            digits.append(SYMBOLS[index % 4])
            index //= 4
        return cls("".join(reversed(digits)))

    @property
    def n(self) -> int:
        return len(self.symbols)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.symbols)

    @property
    def index(self) -> int:
        idx = 0
        for c in self.symbols:
            idx = 4 * idx + SYMBOLS.index(c)
        return idx

    @property
    def label(self) -> str:
        return "".join(_LABEL_OUT[SYMBOLS.index(c)] for c in self.symbols)

    def __str__(self):
        return self.label


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= N_MAX:
        raise InputError(f"qubit count must be in [1, {N_MAX}], got {n!r}")


def enumerate_basis(n: int) -> list[PauliString]:
    """The ``4^n - 1`` traceless Pauli strings in canonical order."""
    _check_n(n)
    return [PauliString.from_index(k, n) for k in range(1, 4**n)]


def basis_labels(n: int) -> list[str]:
    return [p.label for p in enumerate_basis(n)]


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    if isinstance(p, str):
        p = PauliString(p)
    m = np.ones((1, 1), dtype=complex)
    for c in p.symbols:
        m = np.kron(m, PAULI_1Q[c])
    return m


class _Tables:
    """Sparse description of every Pauli string on ``n`` sites.

    Each string has one nonzero per row: ``sigma[r, r ^ xmask] = value[r]``.
    Index 0 (identity) is kept here; the traceless basis is rows 1.. of the
    tables.
    """

    def __init__(self, n):
        dim = 2**n
        digits = np.array(
            [[(k // 4 ** (n - 1 - s)) % 4 for s in range(n)] for k in range(4**n)]
        ).reshape(4**n, n)
        rows = np.arange(dim)
        rowbits = (rows[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
        values = np.ones((4**n, dim), dtype=complex)
        for s in range(n):
            values *= _SITE_VALUE[digits[:, s][:, None], rowbits[None, :, s]]
        xmask = (_SITE_FLIP[digits] << (n - 1 - np.arange(n))[None, :]).sum(axis=1)
        self.n = n
        self.dim = dim
        self.weights_full = (digits != 0).sum(axis=1)
        self.weights = self.weights_full[1:]
        self.rows = rows
        self.cols_full = rows[None, :] ^ xmask[:, None]
        self.values_full = values
        self.cols = self.cols_full[1:]
        self.values = values[1:]
        self.flat_index = (rows[None, :] * dim + self.cols).ravel()


@functools.lru_cache(maxsize=None)
def _tables(n) -> _Tables:
    _check_n(n)
    return _Tables(n)


def pauli_weights(n: int) -> np.ndarray:
    """Weight of each traceless basis string, canonical order."""
    return _tables(n).weights.copy()


def n_from_dim(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else 0
    if 2**n != dim:
        raise DimensionError(f"matrix dimension {dim} is not a power of two")
    _check_n(n)
    return n


def n_from_coeffs(v) -> int:
    size = np.shape(v)[-1]
    n = int(round(np.log(size + 1) / np.log(4)))
    if 4**n - 1 != size:
        raise DimensionError(f"coefficient length {size} is not 4^n - 1")
    _check_n(n)
    return n


def decompose(H, *, check: bool = True) -> np.ndarray:
    """Real coefficients ``V^i = tr(H sigma_i) / 2^n`` of a traceless Hermitian."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {H.shape}")
    n = n_from_dim(H.shape[0])
    if check:
        herm = np.max(np.abs(H - H.conj().T))
        if herm > HERMITIAN_TOL:
            raise NotHermitianError(f"operator is not Hermitian (deviation {herm:.3e})")
        tr = abs(np.trace(H)) / H.shape[0]
        if tr > TRACE_TOL:
            raise NotTracelessError(f"operator has non-negligible trace ({tr:.3e} per dim)")
    t = _tables(n)
    c = np.sum(H[t.cols, t.rows[None, :]] * t.values, axis=1) / t.dim
    return c.real.copy()


def reconstruct(v) -> np.ndarray:
    """Dense matrix ``sum_i V^i sigma_i``."""
    v = np.asarray(v)
    n = n_from_coeffs(v)
    t = _tables(n)
    w = (v[:, None] * t.values).ravel()
    size = t.dim * t.dim
    re = np.bincount(t.flat_index, weights=w.real, minlength=size)
    im = np.bincount(t.flat_index, weights=w.imag, minlength=size)
    return (re + 1j * im).reshape(t.dim, t.dim)


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty factor ``q`` applied to Pauli strings of weight three or more."""

    n: int
    q: float = 1.0

    def __post_init__(self):
        _check_n(self.n)
        if not np.isfinite(self.q) or self.q < 1:
            raise InputError(f"penalty factor must be >= 1, got {self.q}")

    @property
    def weights(self) -> np.ndarray:
        """Metric weight g(i) per basis string: 1 if weight <= 2 else q."""
        return np.where(pauli_weights(self.n) > 2, float(self.q), 1.0)


def _as_coeffs(H):
    """Returns (coeffs, was_matrix)."""
    H = np.asarray(H)
    if H.ndim == 2:
        return decompose(H), True
    if H.ndim == 1:
        n_from_coeffs(H)
        return H.astype(float), False
    raise DimensionError(f"expected a matrix or coefficient vector, got shape {H.shape}")


def _back(v, was_matrix):
    return reconstruct(v) if was_matrix else v


def _penalized_mask(v):
    return pauli_weights(n_from_coeffs(v)) > 2


def apply_P(H):
    """Keep the weight <= 2 components. Accepts matrices or coefficient vectors."""
    v, m = _as_coeffs(H)
    return _back(np.where(_penalized_mask(v), 0.0, v), m)


def apply_Q(H):
    """Keep the weight >= 3 components."""
    v, m = _as_coeffs(H)
    return _back(np.where(_penalized_mask(v), v, 0.0), m)


def _check_params(v, params):
    if n_from_coeffs(v) != params.n:
        raise DimensionError(f"operator on {n_from_coeffs(v)} qubits, params for {params.n}")


def apply_G(H, params: PenaltyParams):
    v, m = _as_coeffs(H)
    _check_params(v, params)
    return _back(v * params.weights, m)


def apply_F(H, params: PenaltyParams):
    v, m = _as_coeffs(H)
    _check_params(v, params)
    return _back(v / params.weights, m)


def metric_inner(H, J, params: PenaltyParams) -> float:
    """``tr(H G(J)) / 2^n`` computed in coefficient space."""
    a, _ = _as_coeffs(H)
    b, _ = _as_coeffs(J)
    if a.shape != b.shape:
        raise DimensionError("operators act on different qubit counts")
    _check_params(a, params)
    return float(np.dot(a * params.weights, b))


def metric_norm(H, params: PenaltyParams) -> float:
    return float(np.sqrt(max(metric_inner(H, H, params), 0.0)))


def coeffs_to_json(v) -> dict:
    v = np.asarray(v, dtype=float)
    return {"n": n_from_coeffs(v), "coeffs": [float(x) for x in v]}


def coeffs_from_json(obj) -> np.ndarray:
    try:
        n = int(obj["n"])
        v = np.array(obj["coeffs"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed coefficient vector: {exc}") from exc
    if v.ndim != 1 or n_from_coeffs(v) != n:
        raise DimensionError(f"coefficient vector length {v.size} does not match n={n}")
    return v
