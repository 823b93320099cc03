import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diracstar.graph import General, Robin
from diracstar.matching import (BoundaryPair, MatchingError, as_pair, complement_pair, krein_kernel_rhs,
                                krein_matrix, permutation_matrix, permute, robin_matrices, symplectic_defect,
                                unpermute, validate_matching, vertex_residual, w_function)
from diracstar.weyl import m_tau, weyl_matrix

from _support import free_edge, graph_of, random_edge, random_valid_pair

seeds = st.integers(0, 2 ** 32 - 1)
sizes = st.integers(1, 4)


def test_robin_n1():
    p = robin_matrices(1, 1.0)
    assert np.array_equal(p.A, [[-1.0]]) and np.array_equal(p.B, [[1.0]])


def test_robin_tau_zero_is_dirichlet():
    p = robin_matrices(2, 0.0)
    assert not p.B.any()
    # A f = 0 forces f_1 = f_2 = 0
    assert np.linalg.matrix_rank(p.A) == 2


@pytest.mark.parametrize("tau", [-2.0, 0.0, 0.5, 3.0, math.inf])
def test_robin_self_adjoint_exactly(tau):
    p = robin_matrices(3, tau)
    assert np.array_equal(p.A @ p.B.conj().T, p.B @ p.A.conj().T)
    assert validate_matching(p).ok


def test_robin_encodes_the_vertex_condition():
    tau = 0.7
    p = robin_matrices(3, tau)
    f = np.full(3, 2.0)
    fhat = np.array([1.0, 2.0, f[0] / tau - 3.0])
    assert vertex_residual(p, f, fhat) <= 1e-15
    q = robin_matrices(3, math.inf)
    assert vertex_residual(q, f, np.array([1.0, 2.0, -3.0])) <= 1e-15


def test_validate_examples():
    assert validate_matching(BoundaryPair(np.eye(2), np.zeros((2, 2)))).ok
    r = validate_matching(BoundaryPair(np.zeros((2, 2)), np.zeros((2, 2))))
    assert not r.ok and r.rank == 0
    r = validate_matching(BoundaryPair(np.eye(2), 1j * np.eye(2)))
    assert not r.ok and r.defect == pytest.approx(2.0)
    with pytest.raises(MatchingError):
        BoundaryPair(np.eye(2), np.eye(3))


@given(seeds, sizes, st.booleans())
def test_random_pairs_validate(seed, n, singular_b):
    p = random_valid_pair(np.random.default_rng(seed), n, singular_b)
    assert validate_matching(p).ok


def test_complement_dirichlet():
    c = complement_pair(BoundaryPair(np.eye(2), np.zeros((2, 2))))
    assert np.allclose(c.C, 0) and np.allclose(c.D, -np.eye(2))


def test_complement_robin():
    p = robin_matrices(2, 1.0)
    c = complement_pair(p)
    assert np.max(np.abs(p.B @ c.C.conj().T - p.A @ c.D.conj().T - np.eye(2))) <= 1e-12


@given(seeds, sizes, st.booleans())
def test_complement_identities(seed, n, singular_b):
    p = random_valid_pair(np.random.default_rng(seed), n, singular_b)
    d = symplectic_defect(p, complement_pair(p))
    assert d["orth"] <= 1e-10 and d["cd"] <= 1e-10 and d["block"] <= 1e-10
    assert d["rank_cd"] == n


def test_complement_rejects_invalid():
    with pytest.raises(MatchingError):
        complement_pair(BoundaryPair(np.zeros((2, 2)), np.zeros((2, 2))))


def test_w_function_properties():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3):
        g = graph_of(*(random_edge(rng) for _ in range(n)))
        p = random_valid_pair(rng, n)
        c = complement_pair(p)
        z = complex(rng.normal(), rng.uniform(0.3, 2.0))
        W = w_function(p, c, g, z)
        Wc = w_function(p, c, g, z.conjugate())
        assert np.allclose(Wc, W.conj().T, rtol=1e-9, atol=1e-12)
        H = (W - W.conj().T) / (2j * z.imag)
        assert np.linalg.eigvalsh(H).min() >= -1e-10 * max(1.0, np.abs(H).max())


def test_w_function_dirichlet_is_m():
    g = graph_of(free_edge(), random_edge(np.random.default_rng(0)))
    p = BoundaryPair(np.eye(2), np.zeros((2, 2)))
    W = w_function(p, complement_pair(p), g, 1j)
    assert np.allclose(W, weyl_matrix(g, 1j), rtol=1e-12)


def test_permute():
    assert np.array_equal(permute([1, 2]), [1, 2])
    assert np.array_equal(permute(["a", "b", "c", "d"]), ["a", "c", "b", "d"])
    with pytest.raises(ValueError):
        permute([1, 2, 3])
    P = permutation_matrix(3)
    u = np.arange(6.0)
    assert np.array_equal(P @ u, permute(u))
    assert np.array_equal(np.linalg.inv(P), P.T)


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False), min_size=1, max_size=5))
def test_permute_roundtrip(half):
    u = np.array(half + half[::-1])
    assert np.array_equal(permute(unpermute(u)), u)
    assert np.array_equal(unpermute(permute(u)), u)


def test_determinant_identity():
    rng = np.random.default_rng(8)
    for n in (1, 2, 3, 4):
        g = graph_of(*(random_edge(rng) for _ in range(n)))
        tau = float(rng.uniform(-3, 3))
        z = complex(rng.normal(), rng.uniform(0.2, 2))
        p = robin_matrices(n, tau)
        det = np.linalg.det(p.B @ weyl_matrix(g, z) - p.A)
        ref = (-1) ** (n + 1) * tau * m_tau(g, tau, z)
        assert det == pytest.approx(ref, rel=1e-8)


def test_krein_kernel_identity():
    rng = np.random.default_rng(9)
    for n in (1, 2, 3):
        g = graph_of(*(random_edge(rng) for _ in range(n)))
        p = random_valid_pair(rng, n, singular_b=(n == 3))
        z = complex(rng.normal(), rng.uniform(0.3, 2))
        zeta = complex(rng.normal(), rng.uniform(0.3, 2))
        Mz, Mw = weyl_matrix(g, z), weyl_matrix(g, zeta)
        lhs = (krein_matrix(p, Mz) - krein_matrix(p, Mw).conj().T) / (z - np.conj(zeta))
        rhs = krein_kernel_rhs(p, Mz, Mw, z, zeta)
        assert np.max(np.abs(lhs - rhs)) <= 1e-8 * np.max(np.abs(lhs))


def test_as_pair():
    assert np.array_equal(as_pair(Robin(2.0), 3).B, robin_matrices(3, 2.0).B)
    gen = General(np.eye(2), np.zeros((2, 2)))
    assert np.array_equal(as_pair(gen, 2).A, np.eye(2))
    with pytest.raises(MatchingError):
        as_pair(gen, 3)
