import numpy as np
import pytest

from geocomplexity import matfun, pauli
from geocomplexity.errors import DimensionError, NotUnitaryError
from geocomplexity.targets import gate_matrix, qft_matrix

from conftest import random_traceless_hermitian, random_unitary


def test_principal_hamiltonian_identity():
    np.testing.assert_allclose(matfun.principal_hamiltonian(np.eye(4)), 0, atol=1e-15)


def test_principal_hamiltonian_one_qubit_fourier():
    U = -1j / np.sqrt(2) * np.array([[1, 1], [1, -1]])
    H = matfun.principal_hamiltonian(U)
    np.testing.assert_allclose(H, np.pi / (2 * np.sqrt(2)) * np.array([[1, 1], [1, -1]]), atol=1e-12)


def test_principal_hamiltonian_cnot():
    H = matfun.principal_hamiltonian(gate_matrix("CNOT"))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(H)), [-np.pi, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(matfun.expm_hermitian(H), gate_matrix("CNOT"), atol=1e-12)
    v = pauli.decompose(matfun.remove_trace(H))
    labels = pauli.basis_labels(2)
    nonzero = {labels[i]: v[i] for i in np.flatnonzero(np.abs(v) > 1e-12)}
    assert nonzero.keys() == {"1X", "Z1", "ZX"}
    assert nonzero["1X"] == pytest.approx(np.pi / 4)
    assert nonzero["Z1"] == pytest.approx(np.pi / 4)
    assert nonzero["ZX"] == pytest.approx(-np.pi / 4)


def test_minus_one_maps_to_plus_pi():
    H = matfun.principal_hamiltonian(-np.eye(2))
    np.testing.assert_allclose(H, -np.pi * np.eye(2), atol=1e-14)


def test_log_rejects_non_unitary():
    with pytest.raises(NotUnitaryError):
        matfun.principal_hamiltonian(2 * np.eye(2))
    with pytest.raises(DimensionError):
        matfun.check_unitary(np.ones((2, 3)))


def test_log_exp_roundtrip_1000_random(rng):
    worst = 0.0
    for k in range(1000):
        n = 1 + k % 4
        U = random_unitary(2**n, rng)
        H = matfun.principal_hamiltonian(U)
        w = np.linalg.eigvalsh(H)
        assert np.all(w >= -np.pi - 1e-12) and np.all(w < np.pi + 1e-12)
        worst = max(worst, matfun.rms_distance(matfun.expm_hermitian(H, 1), U))
    assert worst <= 2e-8


def test_remove_trace():
    np.testing.assert_allclose(matfun.remove_trace(5 * np.eye(2)), 0)
    np.testing.assert_allclose(matfun.remove_trace(np.diag([np.pi, 0])), np.diag([np.pi / 2, -np.pi / 2]))
    H = random_traceless_hermitian(4, np.random.default_rng(1)) + 3 * np.eye(4)
    R = matfun.remove_trace(H)
    assert abs(np.trace(R)) < 1e-12
    np.testing.assert_allclose(matfun.remove_trace(R), R, atol=1e-15)


def test_rephase_to_su():
    U = qft_matrix(2)
    S = matfun.rephase_to_su(U)
    assert np.linalg.det(S) == pytest.approx(1, abs=1e-10)
    np.testing.assert_allclose(matfun.rephase_to_su(S), S, atol=1e-14)
    assert np.linalg.det(matfun.rephase_to_su(1j * np.eye(2))) == pytest.approx(1, abs=1e-12)
    H = matfun.remove_trace(matfun.principal_hamiltonian(U))
    assert matfun.phase_invariant_distance(matfun.expm_hermitian(H), S) < 1e-8


def test_expm_hermitian(rng):
    np.testing.assert_allclose(matfun.expm_hermitian(np.zeros((2, 2))), np.eye(2))
    H = np.pi / (2 * np.sqrt(2)) * np.array([[1, 1], [1, -1]])
    for t in (0.0, 0.3, 0.7, 1.0):
        a, b = np.cos(np.pi * t / 2), 1j / np.sqrt(2) * np.sin(np.pi * t / 2)
        np.testing.assert_allclose(matfun.expm_hermitian(H, t), [[a - b, -b], [-b, a + b]], atol=1e-12)
    H = random_traceless_hermitian(8, rng)
    np.testing.assert_allclose(
        matfun.expm_hermitian(H, 0.3), matfun.expm_hermitian(H, 0.1) @ matfun.expm_hermitian(H, 0.2), atol=1e-12
    )


def test_expm_general(rng):
    np.testing.assert_allclose(matfun.expm_general(np.zeros((3, 3))), np.eye(3))
    np.testing.assert_allclose(matfun.expm_general(1j * np.pi * np.diag([1, -1])), -np.eye(2), atol=1e-12)
    M = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    M /= np.linalg.norm(M, 2)
    w, V = np.linalg.eig(M)
    np.testing.assert_allclose(matfun.expm_general(M), (V * np.exp(w)) @ np.linalg.inv(V), atol=1e-10)
    np.testing.assert_allclose(matfun.expm_general(M) @ matfun.expm_general(-M), np.eye(16), atol=1e-10)


def test_distances(rng):
    assert matfun.rms_distance(np.eye(2), np.eye(2)) == 0
    assert matfun.rms_distance(np.eye(2), -np.eye(2)) == pytest.approx(np.sqrt(2))
    theta = 1e-4
    assert matfun.rms_distance(np.eye(2), np.diag([1, np.exp(1j * theta)])) == pytest.approx(theta / 2, rel=1e-6)
    U, V = random_unitary(4, rng), random_unitary(4, rng)
    assert matfun.phase_invariant_distance(U, np.exp(0.7j) * U) < 1e-14
    assert matfun.phase_invariant_distance(U, V) <= matfun.rms_distance(U, V)
    X, Z = pauli.pauli_matrix("X"), pauli.pauli_matrix("Z")
    assert matfun.phase_invariant_distance(X, Z) == pytest.approx(matfun.rms_distance(X, Z))
    with pytest.raises(DimensionError):
        matfun.rms_distance(np.eye(2), np.eye(4))


def test_unitary_json_roundtrip(rng):
    U = random_unitary(8, rng)
    np.testing.assert_array_equal(matfun.unitary_from_json(matfun.unitary_to_json(U)), U)
