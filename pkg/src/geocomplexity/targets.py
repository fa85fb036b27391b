"""Target unitaries: standard gates, QFT, random circuits, fermion-chain blocks.

Qubit 0 is the most significant (leftmost) tensor factor. A circuit's
``gates[0]`` acts first, so the compiled unitary is ``g_N ... g_2 g_1``.

Random circuits draw from ``numpy.random.Philox`` (a 64-bit counter-based
generator, bit-stable across platforms) seeded with the user's 64-bit seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArityError,
    CircuitError,
    CircuitSyntaxError,
    InputError,
    QubitRangeError,
    UnknownGateError,
)
from .geodesic import analytic_reference
from .matfun import expm_hermitian
from .pauli import N_MAX, PAULI_1Q

_X, _Y, _Z = PAULI_1Q["X"], PAULI_1Q["Y"], PAULI_1Q["Z"]
_XX = np.kron(_X, _X)
_YY = np.kron(_Y, _Y)


def _rot(P, theta):
    return np.cos(theta / 2) * np.eye(P.shape[0]) - 1j * np.sin(theta / 2) * P


def _cp(theta):
    return np.diag([1, 1, 1, np.exp(1j * theta)]).astype(complex)


_FIXED = {
    "I": np.eye(2, dtype=complex),
    "X": _X,
    "Y": _Y,
    "Z": _Z,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}

_PARAMETRIC = {
    "RX": (1, lambda t: _rot(_X, t)),
    "RY": (1, lambda t: _rot(_Y, t)),
    "RZ": (1, lambda t: _rot(_Z, t)),
    "CP": (2, _cp),
    "RXX": (2, lambda t: _rot(_XX, t)),
    "RYY": (2, lambda t: _rot(_YY, t)),
}

GATE_NAMES = tuple(sorted([*_FIXED, *_PARAMETRIC]))
RANDOM_POOL = ("H", "S", "T", "RX", "RY", "RZ", "CNOT", "CZ")


def gate_arity(name: str) -> tuple[int, int]:
    """(qubit count, parameter count) of a gate."""
    if name in _FIXED:
        return int(np.log2(_FIXED[name].shape[0])), 0
    if name in _PARAMETRIC:
        return _PARAMETRIC[name][0], 1
    raise UnknownGateError(f"unknown gate {name!r}; supported: {', '.join(GATE_NAMES)}")


def gate_matrix(name: str, params=()) -> np.ndarray:
    """Matrix of a gate on its own qubits; ``RXX(t) = exp(-i t/2 X X)``, likewise RYY."""
    _, n_params = gate_arity(name)
    params = tuple(params or ())
    if len(params) != n_params:
        raise ArityError(f"gate {name} takes {n_params} parameter(s), got {len(params)}")
    if not all(np.isfinite(p) for p in params):
        raise InputError(f"gate {name} has a non-finite angle")
    if name in _FIXED:
        return _FIXED[name].copy()
    return _PARAMETRIC[name][1](float(params[0]))


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def to_json(self) -> dict:
        out = {"name": self.name, "qubits": list(self.qubits)}
        if self.params:
            out["params"] = [float(p) for p in self.params]
        return out


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not 1 <= self.n <= N_MAX:
            raise QubitRangeError(f"qubit count must be in [1, {N_MAX}], got {self.n!r}")
        for pos, g in enumerate(self.gates):
            _validate_gate(g, self.n, f"gates[{pos}]")

    def to_json(self) -> dict:
        return {"n": int(self.n), "gates": [g.to_json() for g in self.gates]}

    def dumps(self) -> str:
        """Canonical serialization (sorted keys, compact separators)."""
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")) + "\n"


def _validate_gate(g: Gate, n: int, where: str):
    try:
        arity, n_params = gate_arity(g.name)
    except UnknownGateError as exc:
        raise UnknownGateError(f"{where}: {exc}", position=where) from None
    if len(g.qubits) != arity:
        raise ArityError(f"{where}: {g.name} acts on {arity} qubit(s), got {len(g.qubits)}", position=where)
    if len(g.params) != n_params:
        raise ArityError(
            f"{where}: {g.name} takes {n_params} parameter(s), got {len(g.params)}", position=where
        )
    for q in g.qubits:
        if not 0 <= q < n:
            raise QubitRangeError(f"{where}: qubit {q} out of range for n={n}", position=where)
    if len(set(g.qubits)) != len(g.qubits):
        raise QubitRangeError(f"{where}: repeated qubit in {list(g.qubits)}", position=where)
    if not all(np.isfinite(p) for p in g.params):
        raise CircuitError(f"{where}: non-finite angle", position=where)


def embed(M, qubits, n) -> np.ndarray:
    """Lift a k-qubit matrix acting on ``qubits`` to the full 2^n space."""
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    order = list(qubits) + rest
    full = np.kron(M, np.eye(2 ** (n - k)))
    # full acts on qubits in `order`; permute tensor axes back to 0..n-1
    t = full.reshape([2] * (2 * n))
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def compile_circuit(spec: CircuitSpec) -> np.ndarray:
    U = np.eye(2**spec.n, dtype=complex)
    for g in spec.gates:
        U = embed(gate_matrix(g.name, g.params), g.qubits, spec.n) @ U
    return U


def qft_matrix(n: int) -> np.ndarray:
    """DFT matrix ``omega^(jk) / sqrt(2^n)`` with ``omega = exp(2 pi i / 2^n)``."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= N_MAX:
        raise InputError(f"qft size must be in [1, {N_MAX}], got {n!r}")
    N = 2**n
    jk = np.outer(np.arange(N), np.arange(N)) % N
    return np.exp(2j * np.pi * jk / N) / np.sqrt(N)


def cnot_matrix(n: int = 2) -> np.ndarray:
    """CNOT with control 0 and target 1, identity on any further qubits."""
    if not isinstance(n, (int, np.integer)) or not 2 <= n <= N_MAX:
        raise InputError(f"CNOT needs 2..{N_MAX} qubits, got {n!r}")
    return embed(_FIXED["CNOT"], (0, 1), n)


def random_circuit(n: int, depth: int, seed: int) -> CircuitSpec:
    """Depth-many gates drawn uniformly from ``RANDOM_POOL`` (one-qubit subset if n = 1)."""
    if not isinstance(depth, (int, np.integer)) or depth < 1:
        raise InputError(f"depth must be >= 1, got {depth!r}")
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= N_MAX:
        raise InputError(f"qubit count must be in [1, {N_MAX}], got {n!r}")
    if not 0 <= int(seed) < 2**64:
        raise InputError(f"seed must be a 64-bit unsigned value, got {seed!r}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    pool = [g for g in RANDOM_POOL if n >= 2 or gate_arity(g)[0] == 1]
    gates = []
    for _ in range(depth):
        name = pool[int(rng.integers(len(pool)))]
        arity, n_params = gate_arity(name)
        qubits = tuple(int(q) for q in rng.permutation(n)[:arity])
        params = tuple(float(x) for x in rng.uniform(0.0, 2 * np.pi, n_params))
        gates.append(Gate(name, qubits, params))
    return CircuitSpec(n, tuple(gates))


def _position(text: str, offset: int) -> str:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return f"line {line}, column {col} (offset {offset})"


def parse_circuit_file(data) -> CircuitSpec:
    """Parse circuit JSON ``{"n": int, "gates": [{"name", "qubits", "params"?}, ...]}``."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CircuitSyntaxError(f"not UTF-8 at offset {exc.start}", position=exc.start) from None
    else:
        text = str(data)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitSyntaxError(
            f"invalid JSON at {_position(text, exc.pos)}: {exc.msg}", position=exc.pos
        ) from None
    if not isinstance(obj, dict) or "n" not in obj or "gates" not in obj:
        raise CircuitSyntaxError('top level must be an object with "n" and "gates"', position="$")
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise CircuitSyntaxError('"n" must be an integer', position="n")
    if not 1 <= n <= N_MAX:
        raise QubitRangeError(f"qubit count must be in [1, {N_MAX}], got {n}", position="n")
    if not isinstance(obj["gates"], list):
        raise CircuitSyntaxError('"gates" must be a list', position="gates")
    gates = []
    for pos, g in enumerate(obj["gates"]):
        where = f"gates[{pos}]"
        if not isinstance(g, dict) or not isinstance(g.get("name"), str):
            raise CircuitSyntaxError(f'{where}: expected an object with a string "name"', position=where)
        qubits = g.get("qubits")
        if not isinstance(qubits, list) or not all(
            isinstance(q, int) and not isinstance(q, bool) for q in qubits
        ):
            raise CircuitSyntaxError(f'{where}: "qubits" must be a list of integers', position=where)
        params = g.get("params", [])
        if not isinstance(params, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in params
        ):
            raise CircuitSyntaxError(f'{where}: "params" must be a list of numbers', position=where)
        gate = Gate(g["name"].upper(), tuple(qubits), tuple(float(p) for p in params))
        _validate_gate(gate, n, where)
        gates.append(gate)
    return CircuitSpec(n, tuple(gates))


@dataclass(frozen=True)
class FermionChainSpec:
    sites: int
    h: float = 1.0
    dt: float = 0.1
    steps: int = 1
    ordering: str = "even-odd"

    def __post_init__(self):
        if not isinstance(self.sites, (int, np.integer)) or not 2 <= self.sites <= N_MAX:
            raise InputError(f"sites must be in [2, {N_MAX}], got {self.sites!r}")
        if not (np.isfinite(self.h) and np.isfinite(self.dt)):
            raise InputError("h and dt must be finite")
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 0:
            raise InputError(f"steps must be a non-negative integer, got {self.steps!r}")
        if self.ordering not in ("even-odd", "naive"):
            raise InputError(f"ordering must be 'even-odd' or 'naive', got {self.ordering!r}")


def _bond(spec: FermionChainSpec, i: int) -> np.ndarray:
    theta = spec.h * spec.dt
    pair = gate_matrix("RXX", [theta]) @ gate_matrix("RYY", [theta])
    return embed(pair, (i, i + 1), spec.sites)


def fermion_block(spec: FermionChainSpec, block: int) -> np.ndarray:
    """Block 1: bonds (i, i+1) with even i; block 2: odd i."""
    if block not in (1, 2):
        raise InputError(f"block must be 1 or 2, got {block!r}")
    U = np.eye(2**spec.sites, dtype=complex)
    for i in range(block - 1, spec.sites - 1, 2):
        U = _bond(spec, i) @ U
    return U


def fermion_hamiltonian(spec: FermionChainSpec) -> np.ndarray:
    """Jordan-Wigner image ``(h/2) sum_i (X_i X_i+1 + Y_i Y_i+1)``."""
    L = spec.sites
    H = np.zeros((2**L, 2**L), dtype=complex)
    for i in range(L - 1):
        H += embed(_XX + _YY, (i, i + 1), L)
    return 0.5 * spec.h * H


def trotter_evolution(spec: FermionChainSpec) -> np.ndarray:
    if spec.ordering == "even-odd":
        step = fermion_block(spec, 2) @ fermion_block(spec, 1)
    else:
        step = np.eye(2**spec.sites, dtype=complex)
        for i in range(spec.sites - 1):
            step = _bond(spec, i) @ step
    return np.linalg.matrix_power(step, spec.steps)


def exact_evolution(spec: FermionChainSpec) -> np.ndarray:
    return expm_hermitian(fermion_hamiltonian(spec), spec.steps * spec.dt)


def naive_block_complexity() -> float:
    """Twelve CNOTs per block at the CNOT complexity each."""
    return 12 * analytic_reference("cnot")
