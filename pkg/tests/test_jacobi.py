import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import polar

from geocomplexity import jacobi, pauli
from geocomplexity.errors import IllConditionedError, InputError
from geocomplexity.geodesic import evolve_geodesic, geodesic_rhs, straight_line_hamiltonian
from geocomplexity.matfun import expm_general, expm_hermitian, phase_invariant_distance
from geocomplexity.pauli import PenaltyParams
from geocomplexity.targets import qft_matrix


def direct_A(Hm, Km, params):
    """-F([K, G(H)] + [H, G(K)]) by dense matrix arithmetic."""
    G = lambda X: pauli.apply_G(X, params)
    L, GK = G(Hm), G(Km)
    anti = -(Km @ L - L @ Km) - (Hm @ GK - GK @ Hm)
    # F acts on Hermitian operators; commutators of Hermitians are anti-Hermitian
    return -1j * pauli.apply_F(1j * anti, params)


def test_vec_convention(rng):
    M, N, X = (rng.normal(size=(3, 3)) for _ in range(3))
    np.testing.assert_allclose(np.kron(M, N) @ jacobi.vec(X), jacobi.vec(N @ X @ M.T), atol=1e-12)
    np.testing.assert_array_equal(jacobi.unvec(jacobi.vec(X), 3), X)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_flat_FG_eigen_relation(n):
    q = 7.0
    F, G = jacobi.build_flat_FG(PenaltyParams(n, q))
    t = pauli._tables(n)
    S = jacobi._all_pauli_vecs(n)
    g = np.where(t.weights_full > 2, q, 1.0)
    np.testing.assert_allclose(G.matrix @ S, S * g, atol=1e-12)
    np.testing.assert_allclose(F.matrix @ S, S / g, atol=1e-12)
    np.testing.assert_allclose(F @ G, np.eye(4**n), atol=1e-10)


def test_flat_FG_examples():
    F, G = jacobi.build_flat_FG(PenaltyParams(1, 9.0))
    np.testing.assert_allclose(F.matrix, np.eye(4), atol=1e-14)
    np.testing.assert_allclose(G.matrix, np.eye(4), atol=1e-14)
    F, G = jacobi.build_flat_FG(PenaltyParams(3, 4.0))
    v = jacobi.vec(pauli.pauli_matrix("XYZ"))
    np.testing.assert_allclose(G @ v, 4 * v, atol=1e-12)


def test_build_A_zero_cases(rng):
    params = PenaltyParams(3, 5.0)
    np.testing.assert_allclose(jacobi.build_A(np.zeros(63), params), 0, atol=0)
    p1 = PenaltyParams(3, 1.0)
    FG = jacobi.build_flat_FG(p1)
    for _ in range(5):
        A = jacobi.build_A(rng.normal(size=63), p1, FG)
        assert np.max(np.abs(A)) <= 1e-12


def test_build_A_example():
    params = PenaltyParams(3, 2.0)
    Hm, Km = pauli.pauli_matrix("ZZZ"), pauli.pauli_matrix("IIX")
    A = jacobi.build_A(pauli.decompose(Hm), params)
    np.testing.assert_allclose(jacobi.unvec(A @ jacobi.vec(Km), 8), direct_A(Hm, Km, params), atol=1e-10)


@pytest.mark.parametrize("q", [2.0, 64.0])
def test_build_A_matches_direct_100_draws(q, rng):
    params = PenaltyParams(3, q)
    FG = jacobi.build_flat_FG(params)
    for _ in range(50):
        h, k = rng.normal(size=63), rng.normal(size=63)
        Hm, Km = pauli.reconstruct(h), pauli.reconstruct(k)
        got = jacobi.unvec(jacobi.build_A(h, params, FG) @ jacobi.vec(Km), 8)
        np.testing.assert_allclose(got, direct_A(Hm, Km, params), atol=1e-10)


def test_k_propagator_constant_and_zero(rng):
    times = np.linspace(0, 1, 41)
    Ks = jacobi.k_propagator([np.zeros((4, 4))] * 41, times)
    assert all(np.array_equal(K, np.eye(4)) for K in Ks)
    A0 = rng.normal(size=(6, 6))
    Ks = jacobi.k_propagator([A0] * 41, times)
    for t, K in zip(times, Ks):
        np.testing.assert_allclose(K, expm_general(1j * t * A0), atol=1e-8)


def test_k_propagator_modulated(rng):
    A0 = rng.normal(size=(6, 6)) / 3
    f = lambda t: np.cos(2 * t) + 0.5
    F = lambda t: np.sin(2 * t) / 2 + 0.5 * t
    times = np.linspace(0, 1, 801)
    Ks = jacobi.k_propagator([f(t) * A0 for t in times], times)
    for t, K in zip(times, Ks):
        np.testing.assert_allclose(K, expm_general(1j * F(t) * A0), atol=1e-6)


def test_k_propagator_second_order(rng):
    # non-commuting family; halving dt cuts the error about 4x
    A0, A1 = rng.normal(size=(2, 5, 5)) / 2
    A = lambda t: A0 + np.sin(3 * t) * A1
    ref_times = np.linspace(0, 1, 6401)
    ref = jacobi.k_propagator([A(t) for t in ref_times], ref_times)[-1]
    errs = []
    for m in (41, 81):
        times = np.linspace(0, 1, m)
        errs.append(np.linalg.norm(jacobi.k_propagator([A(t) for t in times], times)[-1] - ref))
    assert 3 <= errs[0] / errs[1] <= 5


def test_k_propagator_threads_match(monkeypatch, rng):
    times = np.linspace(0, 1, 11)
    As = [rng.normal(size=(64, 64)) / 10 for _ in times]
    monkeypatch.setenv("QGEO_THREADS", "1")
    serial = jacobi.k_propagator(As, times)
    monkeypatch.setenv("QGEO_THREADS", "4")
    threaded = jacobi.k_propagator(As, times)
    assert all(np.array_equal(a, b) for a, b in zip(serial, threaded))


def test_k_propagator_rejects_nonuniform():
    with pytest.raises(InputError):
        jacobi.k_propagator([np.eye(2)] * 3, [0, 0.1, 1])


def test_jacobi_identity_case():
    params = PenaltyParams(3, 1.0)
    sol = evolve_geodesic(np.zeros(63), params, n_t=11)
    jp = jacobi.jacobi_propagator(sol, params)
    np.testing.assert_allclose(jp.tensor, np.eye(64), atol=1e-10)


def test_jacobi_q1_constant_H_quadrature(rng):
    params = PenaltyParams(2, 1.0)
    h = rng.normal(size=15)
    Hm = pauli.reconstruct(h)
    sol = evolve_geodesic(h, params, n_t=401)
    jp = jacobi.jacobi_propagator(sol, params)
    X = pauli.reconstruct(rng.normal(size=15))
    exact, _ = quad_vec(lambda t: expm_hermitian(Hm, -t) @ X @ expm_hermitian(Hm, t), 0, 1, epsabs=1e-12)
    got = jacobi.unvec(jp.tensor @ jacobi.vec(X), 4)
    np.testing.assert_allclose(got, exact, atol=1e-4)
    assert jp.condition_estimate < 1e6


def test_invert_jacobi():
    jp = jacobi.JacobiPropagator(2, 1.0, 2 * np.eye(4), 1.0)
    np.testing.assert_allclose(jacobi.invert_jacobi(jp), 0.5 * np.eye(4))
    rng = np.random.default_rng(3)
    M = np.eye(16) + 0.1 * rng.normal(size=(16, 16))
    inv = jacobi.invert_jacobi(jacobi.JacobiPropagator(2, 1.0, M, np.linalg.cond(M, 1)))
    np.testing.assert_allclose(M @ inv, np.eye(16), atol=1e-9)
    with pytest.raises(IllConditionedError):
        jacobi.invert_jacobi(jacobi.JacobiPropagator(2, 1.0, np.diag([1, 1, 1, 0.0]), np.inf))


def test_dH0_dq_small_n_is_zero(rng):
    for n in (1, 2):
        for q in (1.0, 7.0):
            h = rng.normal(size=4**n - 1)
            params = PenaltyParams(n, q)
            assert not np.any(jacobi.dH0_dq(h, params, evolve_geodesic(h, params, n_t=11)))


def test_dH0_dq_zero_without_penalized_part():
    labels = pauli.basis_labels(3)
    h = np.zeros(63)
    h[labels.index("XX1")] = 0.7
    h[labels.index("1Z1")] = -0.4
    params = PenaltyParams(3, 1.0)
    d = jacobi.dH0_dq(h, params, evolve_geodesic(h, params))
    assert np.max(np.abs(d)) < 1e-10


def test_q1_source_refinement():
    # trapezoid on 201 samples vs a 10x finer grid
    h = straight_line_hamiltonian(qft_matrix(3))
    params = PenaltyParams(3, 1.0)
    Pm = pauli.reconstruct(pauli.apply_P(h))
    Qm = pauli.reconstruct(pauli.apply_Q(h))
    src = 1j * (Pm @ Qm - Qm @ Pm)
    from scipy.integrate import trapezoid

    vals = []
    for n_t in (201, 2001):
        sol = evolve_geodesic(h, params, n_t=n_t)
        vals.append(trapezoid([t * U.conj().T @ src @ U for t, U in zip(sol.times, sol.U_samples)], sol.times, axis=0))
    assert np.max(np.abs(vals[0] - vals[1])) < 1e-4


@pytest.mark.parametrize("q0", [1.0, 3.0])
def test_dH0_dq_keeps_endpoint_fixed(q0):
    # take the endpoint of an arbitrary geodesic as the target; a first-order
    # update in q must keep the endpoint to second order
    rng = np.random.default_rng(7)
    h = straight_line_hamiltonian(qft_matrix(3)) if q0 == 1 else 0.2 * rng.normal(size=63)
    params = PenaltyParams(3, q0)
    sol = evolve_geodesic(h, params)
    target, _ = polar(sol.U_final)
    d = jacobi.dH0_dq(h, params, sol)
    errs_fixed, errs_updated = [], []
    for dq in (1e-2, 5e-3):
        p = PenaltyParams(3, q0 + dq)
        errs_fixed.append(evolve_geodesic(h, p, target=target).boundary_error)
        errs_updated.append(evolve_geodesic(h + dq * d, p, target=target).boundary_error)
    assert errs_updated[0] < 0.05 * errs_fixed[0]
    # second order: halving dq quarters the residual
    assert 3 < errs_updated[0] / errs_updated[1] < 5


def test_christoffel_vanishes():
    for q in (1.0, 8.0):
        G = jacobi.christoffel_tensor(PenaltyParams(2, q))
        assert np.max(np.abs(G)) < 1e-12
    G = jacobi.christoffel_tensor(PenaltyParams(3, 1.0))
    assert np.max(np.abs(G)) < 1e-12


def test_christoffel_single_matches_tensor():
    params = PenaltyParams(3, 4.0)
    G = jacobi.christoffel_tensor(params)
    rng = np.random.default_rng(11)
    for a, b, d in rng.integers(0, 63, size=(20, 3)):
        assert jacobi.christoffel(a, b, d, params) == pytest.approx(G[d, a, b], abs=1e-12)


def test_christoffel_matches_geodesic_rhs_100_draws(rng):
    params = PenaltyParams(3, 4.0)
    G = jacobi.christoffel_tensor(params)
    for _ in range(100):
        v = rng.normal(size=63)
        _, dV = geodesic_rhs(v, np.eye(8), params)
        np.testing.assert_allclose(-np.einsum("cab,a,b->c", G, v, v), dV, atol=1e-8)
