import numpy as np
import numpy.testing as npt
import pytest

from relfeat.covariance import relevance
from relfeat.datasets import gen_discrete_joint
from relfeat.discrete import (JointDistribution, apply_channel, channel_svd, chi2,
                              conditional_expectation, exact_covariances,
                              fisher_inner, frobenius_distance, load_joint_csv,
                              save_joint_csv, truncated_joint)

TWO_BY_TWO = [[0.4, 0.1], [0.1, 0.4]]


def random_joints(seed, count, max_side=7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield gen_discrete_joint(int(rng.integers(2, max_side + 1)),
                                 int(rng.integers(2, max_side + 1)),
                                 rng.integers(0, 2 ** 31))


def test_joint_construction_and_marginals():
    j = JointDistribution.from_table(TWO_BY_TWO)
    npt.assert_allclose(j.p_x, [0.5, 0.5])
    npt.assert_allclose(j.p_y, [0.5, 0.5])
    assert j.n_x == j.n_y == 2


def test_joint_validation():
    with pytest.raises(ValueError):
        JointDistribution.from_table([[0.5, -0.1], [0.3, 0.3]])
    with pytest.raises(ValueError):
        JointDistribution.from_table([[0.5, 0.2], [0.1, 0.1]])  # sums to 0.9
    with pytest.raises(ValueError):
        JointDistribution.from_table([[0.5, 0.5], [0.0, 0.0]])  # zero marginal
    with pytest.raises(ValueError):
        JointDistribution(table=np.array(TWO_BY_TWO), p_x=np.array([0.4, 0.6]),
                          p_y=np.array([0.5, 0.5]))


def test_joint_rank():
    independent = np.outer([0.3, 0.7], [0.25, 0.25, 0.5])
    assert JointDistribution.from_table(independent).rank == 1
    assert JointDistribution.from_table(TWO_BY_TWO).rank == 2


def test_fisher_inner_normalized_self():
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = rng.random(5) + 0.1
        p /= p.sum()
        assert fisher_inner(p, p, p) == pytest.approx(1.0, abs=1e-12)


def test_fisher_inner_orthogonal_pair():
    p = np.array([0.5, 0.5])
    assert fisher_inner([0.5, 0.5], [0.5, -0.5], p) == pytest.approx(0.0, abs=1e-15)


def test_fisher_inner_direct_summation():
    rng = np.random.default_rng(1)
    p = rng.random(5) + 0.1
    p /= p.sum()
    mu = rng.standard_normal(5)
    mu2 = rng.standard_normal(5)
    want = sum(mu[i] * mu2[i] / p[i] for i in range(5))
    assert fisher_inner(mu, mu2, p) == pytest.approx(want, abs=1e-12)


def test_fisher_inner_validation():
    with pytest.raises(ValueError):
        fisher_inner([1.0, 0.0], [1.0, 0.0], [1.0, 0.0])  # zero entry in p
    with pytest.raises(ValueError):
        fisher_inner([1.0], [1.0, 0.0], [0.5, 0.5])


def test_chi2_identical_is_zero():
    p = np.array([0.2, 0.3, 0.5])
    assert chi2(p, p) == pytest.approx(0.0, abs=1e-15)


def test_chi2_hand_value():
    assert chi2([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.25, abs=1e-12)


def test_chi2_direct_summation():
    rng = np.random.default_rng(2)
    p = rng.random(6) + 0.1
    p /= p.sum()
    q = rng.random(6) + 0.1
    q /= q.sum()
    want = np.sum((q - p) ** 2 / p)
    assert chi2(q, p) == pytest.approx(want, abs=1e-12)
    assert chi2(q, p) >= 0


def test_apply_channel_maps_marginal_to_marginal():
    for j in random_joints(3, 5):
        npt.assert_allclose(apply_channel(j, j.p_x, "x_to_y"), j.p_y, atol=1e-12)
        npt.assert_allclose(apply_channel(j, j.p_y, "y_to_x"), j.p_x, atol=1e-12)


def test_apply_channel_independent_joint():
    p_x = np.array([0.3, 0.7])
    p_y = np.array([0.25, 0.25, 0.5])
    j = JointDistribution.from_table(np.outer(p_x, p_y))
    mu = np.array([0.4, -1.2])
    npt.assert_allclose(apply_channel(j, mu, "x_to_y"), p_y * mu.sum(), atol=1e-12)


def test_apply_channel_direct_kernel():
    j = gen_discrete_joint(3, 4, seed=9)
    rng = np.random.default_rng(4)
    mu = rng.standard_normal(3)
    # direct definition: nu(y) = sum_x p(y|x) mu(x)
    want = np.array([sum(j.table[x, y] / j.p_x[x] * mu[x] for x in range(3))
                     for y in range(4)])
    npt.assert_allclose(apply_channel(j, mu, "x_to_y"), want, atol=1e-12)
    with pytest.raises(ValueError):
        apply_channel(j, mu, "sideways")


def test_adjointness():
    rng = np.random.default_rng(5)
    for j in random_joints(6, 10):
        mu = rng.standard_normal(j.n_x)
        nu = rng.standard_normal(j.n_y)
        lhs = fisher_inner(nu, apply_channel(j, mu, "x_to_y"), j.p_y)
        rhs = fisher_inner(apply_channel(j, nu, "y_to_x"), mu, j.p_x)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_contractivity():
    rng = np.random.default_rng(7)
    for j in random_joints(8, 10):
        q = rng.random(j.n_x) + 0.05
        q /= q.sum()
        assert chi2(apply_channel(j, q, "x_to_y"), j.p_y) <= chi2(q, j.p_x) + 1e-12


def test_channel_svd_independent():
    j = JointDistribution.from_table(np.outer([0.3, 0.7], [0.5, 0.5]))
    d = channel_svd(j)
    npt.assert_allclose(d.etas, [1.0, 0.0], atol=1e-12)


def test_channel_svd_perfectly_correlated():
    # degenerate spectrum: deflation must still pin the constant pair
    j = JointDistribution.from_table([[0.5, 0.0], [0.0, 0.5]])
    d = channel_svd(j)
    npt.assert_allclose(d.etas, [1.0, 1.0], atol=1e-12)
    npt.assert_allclose(d.left_vars[:, 0], 1.0, atol=1e-12)
    npt.assert_allclose(d.right_vars[:, 0], 1.0, atol=1e-12)


def test_channel_svd_hand_case():
    d = channel_svd(JointDistribution.from_table(TWO_BY_TWO))
    npt.assert_allclose(d.etas, [1.0, 0.6], atol=1e-12)


def test_channel_svd_invariants():
    for j in random_joints(10, 10):
        d = channel_svd(j)
        assert np.all(np.diff(d.etas) <= 1e-12)
        assert d.etas[0] == pytest.approx(1.0, abs=1e-12)
        assert d.etas.max() <= 1 + 1e-10
        npt.assert_allclose(d.left_vars[:, 0], 1.0, atol=1e-12)
        npt.assert_allclose(d.right_vars[:, 0], 1.0, atol=1e-12)
        # orthonormality under the marginals
        gram_a = (d.left_vars * j.p_x[:, None]).T @ d.left_vars
        gram_b = (d.right_vars * j.p_y[:, None]).T @ d.right_vars
        npt.assert_allclose(gram_a, np.eye(d.r), atol=1e-10)
        npt.assert_allclose(gram_b, np.eye(d.r), atol=1e-10)
        # canonical relations through the channel
        for i in range(d.r):
            lhs = apply_channel(j, j.p_x * d.left_vars[:, i], "x_to_y")
            npt.assert_allclose(lhs, d.etas[i] * j.p_y * d.right_vars[:, i],
                                atol=1e-9)
            rhs = apply_channel(j, j.p_y * d.right_vars[:, i], "y_to_x")
            npt.assert_allclose(rhs, d.etas[i] * j.p_x * d.left_vars[:, i],
                                atol=1e-9)
        # sign convention on the left variables
        for i in range(d.r):
            col = d.left_vars[:, i]
            sig = col[np.abs(col) > 1e-9]
            assert sig.size and sig[0] > 0


def test_truncated_joint_full_rank_reconstructs():
    for j in random_joints(11, 5):
        d = channel_svd(j)
        npt.assert_allclose(truncated_joint(d, d.r), j.table, atol=1e-10)


def test_truncated_joint_rank_one_is_product():
    j = JointDistribution.from_table(TWO_BY_TWO)
    d = channel_svd(j)
    npt.assert_allclose(truncated_joint(d, 1), np.full((2, 2), 0.25), atol=1e-12)


def test_truncated_joint_keeps_marginals():
    for j in random_joints(12, 5):
        d = channel_svd(j)
        for k0 in range(1, d.r + 1):
            q = truncated_joint(d, k0)
            npt.assert_allclose(q.sum(axis=1), j.p_x, atol=1e-10)
            npt.assert_allclose(q.sum(axis=0), j.p_y, atol=1e-10)


def test_truncated_joint_range_check():
    d = channel_svd(JointDistribution.from_table(TWO_BY_TWO))
    with pytest.raises(ValueError):
        truncated_joint(d, 0)
    with pytest.raises(ValueError):
        truncated_joint(d, 3)


def test_frobenius_distance_zero_at_table():
    j = JointDistribution.from_table(TWO_BY_TWO)
    assert frobenius_distance(j, j.table) == pytest.approx(0.0, abs=1e-15)


def test_frobenius_distance_equals_tail():
    for j in random_joints(13, 8):
        d = channel_svd(j)
        for k0 in range(1, d.r + 1):
            got = frobenius_distance(j, truncated_joint(d, k0))
            want = float(np.sum(d.etas[k0:] ** 2))
            assert got == pytest.approx(want, abs=1e-9)


def test_truncation_beats_random_alternatives():
    rng = np.random.default_rng(14)
    j = gen_discrete_joint(6, 5, seed=100)
    d = channel_svd(j)
    s = j.whitened()
    root = np.sqrt(np.outer(j.p_y, j.p_x))
    k0 = 2
    best = frobenius_distance(j, truncated_joint(d, k0))
    for _ in range(20):
        qy, _ = np.linalg.qr(rng.standard_normal((j.n_y, k0)))
        qx, _ = np.linalg.qr(rng.standard_normal((j.n_x, k0)))
        w = qy @ qy.T @ s @ qx @ qx.T  # best approximation inside that subspace pair
        alt = (w * root).T
        assert frobenius_distance(j, alt) >= best - 1e-12


def test_exact_covariances_indicator_relevance():
    j = JointDistribution.from_table(TWO_BY_TWO)
    t = exact_covariances(j, np.eye(2), np.eye(2))
    assert t.n_samples == 0
    assert relevance(t) == pytest.approx(1.36, abs=1e-12)


def test_exact_covariances_spectrum_recovery():
    for j in random_joints(15, 8):
        t = exact_covariances(j, np.eye(j.n_x), np.eye(j.n_y))
        d = channel_svd(j)
        assert relevance(t) == pytest.approx(float(np.sum(d.etas ** 2)), abs=1e-9)


def test_conditional_expectation_direct():
    j = gen_discrete_joint(4, 3, seed=5)
    rng = np.random.default_rng(16)
    theta = rng.standard_normal((4, 2))
    got = conditional_expectation(j, theta, "x_to_y")
    for y in range(3):
        p_x_given_y = j.table[:, y] / j.p_y[y]
        npt.assert_allclose(got[y], p_x_given_y @ theta, atol=1e-12)
    back = conditional_expectation(j, rng.standard_normal(3), "y_to_x")
    assert back.shape == (4, 1)


def test_joint_csv_round_trip(tmp_path):
    j = gen_discrete_joint(5, 3, seed=77)
    path = tmp_path / "joint.csv"
    save_joint_csv(j, path)
    loaded = load_joint_csv(path)
    npt.assert_array_equal(loaded.table, j.table)


def test_joint_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.5,0.5\n")
    with pytest.raises(ValueError):
        load_joint_csv(path)
