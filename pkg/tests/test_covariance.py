import numpy as np
import numpy.testing as npt
import pytest

from relfeat.covariance import (CovarianceTriple, Stabilizer, covariances,
                                half_inverse, loss, projector_overlap, relevance,
                                stable_inverse)


def test_covariances_constant_column():
    ones = np.ones((10, 1))
    t = covariances(ones, ones)
    npt.assert_allclose(t.K, [[1.0]])
    npt.assert_allclose(t.L, [[1.0]])
    npt.assert_allclose(t.A, [[1.0]])
    assert t.n_samples == 10


def test_covariances_identical_batches():
    rng = np.random.default_rng(0)
    F = rng.standard_normal((40, 3))
    t = covariances(F, F)
    npt.assert_allclose(t.K, t.L)
    npt.assert_allclose(t.K, t.A)


def test_covariances_match_direct_summation():
    rng = np.random.default_rng(1)
    for _ in range(5):
        F = rng.standard_normal((50, 3))
        G = rng.standard_normal((50, 3))
        t = covariances(F, G)
        K = np.zeros((3, 3))
        L = np.zeros((3, 3))
        A = np.zeros((3, 3))
        for n in range(50):
            K += np.outer(F[n], F[n])
            L += np.outer(G[n], G[n])
            A += np.outer(G[n], F[n])
        npt.assert_allclose(t.K, K / 50, atol=1e-12)
        npt.assert_allclose(t.L, L / 50, atol=1e-12)
        npt.assert_allclose(t.A, A / 50, atol=1e-12)


def test_covariances_symmetric_psd():
    rng = np.random.default_rng(2)
    for _ in range(10):
        F = rng.standard_normal((30, 4))
        t = covariances(F, rng.standard_normal((30, 2)))
        npt.assert_allclose(t.K, t.K.T, atol=1e-12)
        npt.assert_allclose(t.L, t.L.T, atol=1e-12)
        assert np.linalg.eigvalsh(t.K).min() >= -1e-10
        assert np.linalg.eigvalsh(t.L).min() >= -1e-10


def test_covariances_validation():
    with pytest.raises(ValueError):
        covariances(np.ones((5, 2)), np.ones((6, 2)))
    with pytest.raises(ValueError):
        covariances(np.array([[np.nan, 1.0]]), np.ones((1, 2)))
    with pytest.raises(ValueError):
        covariances(np.ones(5), np.ones(5))


def test_stabilizer_validation():
    with pytest.raises(ValueError):
        Stabilizer(kind="other")
    with pytest.raises(ValueError):
        Stabilizer.ridge(eps=0.0)
    with pytest.raises(ValueError):
        Stabilizer.pseudo(tol=-1.0)


def test_stabilizer_dict_round_trip():
    for s in (Stabilizer.pseudo(1e-8), Stabilizer.ridge(1e-5)):
        assert Stabilizer.from_dict(s.to_dict()) == s


def test_stable_inverse_identity():
    npt.assert_allclose(stable_inverse(np.eye(4)), np.eye(4), atol=1e-14)


def test_stable_inverse_projector():
    m = np.diag([1.0, 0.0])
    npt.assert_allclose(stable_inverse(m, Stabilizer.pseudo()), m, atol=1e-14)


def test_stable_inverse_penrose_conditions():
    rng = np.random.default_rng(3)
    for _ in range(10):
        B = rng.standard_normal((5, 3))
        m = B @ B.T  # rank 3 Gram matrix
        m_inv = stable_inverse(m, Stabilizer.pseudo())
        npt.assert_allclose(m @ m_inv @ m, m, atol=1e-9)
        npt.assert_allclose(m_inv @ m @ m_inv, m_inv, atol=1e-9)


def test_stable_inverse_ridge():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((4, 4))
    m = m @ m.T
    eps = 1e-3
    want = np.linalg.inv(m + eps * np.eye(4))
    npt.assert_allclose(stable_inverse(m, Stabilizer.ridge(eps)), want, atol=1e-12)


def test_stable_inverse_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        stable_inverse(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_half_inverse_squares_to_inverse():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((6, 6))
    m = B @ B.T + np.eye(6)
    h = half_inverse(m)
    npt.assert_allclose(h @ h, stable_inverse(m), atol=1e-10)


def test_half_inverse_rank_deficient():
    m = np.diag([4.0, 0.0])
    h = half_inverse(m, Stabilizer.pseudo())
    npt.assert_allclose(h, np.diag([0.5, 0.0]), atol=1e-14)


def test_relevance_constant_feature_is_one():
    t = covariances(np.ones((20, 1)), np.ones((20, 1)))
    assert relevance(t) == pytest.approx(1.0, abs=1e-12)


def test_relevance_identical_full_rank_features():
    rng = np.random.default_rng(6)
    F = rng.standard_normal((60, 4))
    t = covariances(F, F)
    assert relevance(t) == pytest.approx(4.0, abs=1e-9)


def test_relevance_bounds():
    rng = np.random.default_rng(7)
    for _ in range(20):
        F = rng.standard_normal((50, 3))
        G = rng.standard_normal((50, 3))
        r = relevance(covariances(F, G))
        assert -1e-9 <= r <= 3 + 1e-6
        # appending constants to both sides keeps relevance >= 1
        Fc = np.hstack([F, np.ones((50, 1))])
        Gc = np.hstack([G, np.ones((50, 1))])
        assert relevance(covariances(Fc, Gc)) >= 1 - 1e-8


def test_relevance_span_invariance():
    rng = np.random.default_rng(8)
    F = rng.standard_normal((80, 3))
    G = rng.standard_normal((80, 3))
    base = relevance(covariances(F, G))
    for _ in range(10):
        M = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        M2 = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        mixed = relevance(covariances(F @ M, G @ M2))
        assert mixed == pytest.approx(base, abs=1e-8)


def test_loss_at_optimum():
    rng = np.random.default_rng(9)
    F = rng.standard_normal((50, 3))
    assert loss(covariances(F, F), 3) == pytest.approx(0.0, abs=1e-9)


def test_loss_duplicated_constants():
    F = np.ones((30, 3))
    assert loss(covariances(F, F), 3) == pytest.approx(2.0, abs=1e-9)


def test_loss_k0_mismatch():
    t = covariances(np.ones((5, 2)), np.ones((5, 2)))
    with pytest.raises(ValueError):
        loss(t, 3)


def test_loss_bounds():
    rng = np.random.default_rng(10)
    for _ in range(20):
        F = rng.standard_normal((40, 2))
        G = rng.standard_normal((40, 2))
        c = loss(covariances(F, G), 2)
        assert -1e-6 <= c <= 2 + 1e-6


def test_projector_overlap_identical():
    rng = np.random.default_rng(11)
    F = rng.standard_normal((30, 3))
    assert projector_overlap(F, F) == pytest.approx(3.0, abs=1e-9)


def test_projector_overlap_disjoint_blocks():
    F = np.zeros((10, 1))
    G = np.zeros((10, 1))
    F[:5, 0] = 1.0
    G[5:, 0] = 1.0
    assert projector_overlap(F, G) == pytest.approx(0.0, abs=1e-12)


def test_projector_overlap_equals_relevance():
    rng = np.random.default_rng(12)
    for _ in range(10):
        F = rng.standard_normal((40, 3))
        G = rng.standard_normal((40, 2))
        overlap = projector_overlap(F, G)
        rel = relevance(covariances(F, G))
        assert overlap == pytest.approx(rel, abs=1e-8)


def test_exact_triple_marker():
    t = CovarianceTriple(K=np.eye(2), L=np.eye(2), A=np.eye(2), n_samples=0)
    assert t.k == 2
    assert t.n_samples == 0
