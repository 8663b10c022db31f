import numpy as np
import numpy.testing as npt
import pytest

from relfeat.covariance import Stabilizer, covariances, loss as triple_loss
from relfeat.network import FeatureNetwork, loss_and_feature_grads

STAB = Stabilizer.pseudo()


def test_create_shapes_and_init():
    rng = np.random.default_rng(0)
    net = FeatureNetwork.create((2, 64, 64, 3), rng)
    assert [w.shape for w in net.weights] == [(2, 64), (64, 64), (64, 3)]
    assert all(np.all(b == 0) for b in net.biases)
    assert net.activations == ["tanh", "tanh", "tanh"]
    for w in net.weights:
        bound = np.sqrt(6.0 / sum(w.shape))
        assert np.abs(w).max() <= bound
    assert net.n_in == 2 and net.n_out == 3


def test_create_seeded_determinism():
    a = FeatureNetwork.create((3, 8, 2), np.random.default_rng(42))
    b = FeatureNetwork.create((3, 8, 2), np.random.default_rng(42))
    for wa, wb in zip(a.weights, b.weights):
        npt.assert_array_equal(wa, wb)


def test_create_validation():
    with pytest.raises(ValueError):
        FeatureNetwork.create((5,), np.random.default_rng(0))
    with pytest.raises(ValueError):
        FeatureNetwork(weights=[np.ones((2, 2))], biases=[np.zeros(2)],
                       activations=["relu"])


def test_forward_zero_net():
    rng = np.random.default_rng(1)
    net = FeatureNetwork.create((2, 4, 2), rng)
    for w in net.weights:
        w[:] = 0.0
    out = net.forward(rng.standard_normal((7, 2)))
    npt.assert_array_equal(out, np.zeros((7, 2)))


def test_forward_identity_map():
    net = FeatureNetwork.identity_map(3)
    x = np.random.default_rng(2).standard_normal((5, 3))
    npt.assert_array_equal(net.forward(x), x)
    assert net.parameters() == []
    assert net.n_out == 3


def test_forward_single_linear_layer():
    w = np.array([[2.0, 0.0], [0.0, -1.0]])
    b = np.array([0.5, 0.0])
    net = FeatureNetwork(weights=[w], biases=[b], activations=["identity"])
    x = np.array([[1.0, 1.0], [0.0, 2.0]])
    npt.assert_allclose(net.forward(x), x @ w + b)


def test_forward_matches_manual_chain():
    rng = np.random.default_rng(3)
    net = FeatureNetwork.create((3, 5, 2), rng)
    x = rng.standard_normal((10, 3))
    h = np.tanh(x @ net.weights[0] + net.biases[0])
    want = np.tanh(h @ net.weights[1] + net.biases[1])
    npt.assert_allclose(net.forward(x), want, atol=1e-12)


def test_backprop_zero_upstream():
    rng = np.random.default_rng(4)
    net = FeatureNetwork.create((2, 4, 2), rng)
    x = rng.standard_normal((6, 2))
    g = net.backprop(x, np.zeros((6, 2)))
    for gw, gb in zip(g.weights, g.biases):
        npt.assert_array_equal(gw, np.zeros_like(gw))
        npt.assert_array_equal(gb, np.zeros_like(gb))


def test_backprop_single_linear_layer():
    rng = np.random.default_rng(5)
    net = FeatureNetwork(weights=[rng.standard_normal((3, 2))],
                         biases=[np.zeros(2)], activations=["identity"])
    x = rng.standard_normal((8, 3))
    u = rng.standard_normal((8, 2))
    g = net.backprop(x, u)
    npt.assert_allclose(g.weights[0], x.T @ u, atol=1e-12)
    npt.assert_allclose(g.biases[0], u.sum(axis=0), atol=1e-12)


def test_backprop_finite_difference():
    # three tanh layers, gradients of a quadratic readout of the features
    rng = np.random.default_rng(6)
    net = FeatureNetwork.create((2, 5, 4, 2), rng)
    x = rng.standard_normal((12, 2))
    c = rng.standard_normal((12, 2))

    def scalar():
        return float(np.sum(c * net.forward(x)))

    g = net.backprop(x, c)
    h = 1e-6
    for li in range(3):
        flat = net.weights[li].reshape(-1)
        gflat = g.weights[li].reshape(-1)
        for pi in rng.permutation(flat.size)[:6]:
            orig = flat[pi]
            flat[pi] = orig + h
            up = scalar()
            flat[pi] = orig - h
            down = scalar()
            flat[pi] = orig
            num = (up - down) / (2 * h)
            assert num == pytest.approx(gflat[pi], rel=1e-4, abs=1e-9)


def test_loss_grads_zero_at_optimum():
    rng = np.random.default_rng(7)
    F = rng.standard_normal((50, 3))
    loss, dF, dG, _ = loss_and_feature_grads(F, F.copy(), 3, STAB)
    assert loss == pytest.approx(0.0, abs=1e-9)
    assert np.abs(dF).max() < 1e-8
    assert np.abs(dG).max() < 1e-8


def test_loss_matches_covariance_loss():
    rng = np.random.default_rng(8)
    F = rng.standard_normal((40, 2))
    G = rng.standard_normal((40, 2))
    got, _, _, triple = loss_and_feature_grads(F, G, 2, STAB)
    assert got == pytest.approx(triple_loss(covariances(F, G), 2, STAB), abs=1e-12)
    assert triple.n_samples == 40


def test_loss_feature_grads_finite_difference():
    rng = np.random.default_rng(9)
    F = rng.standard_normal((40, 2))
    G = rng.standard_normal((40, 2))
    _, dF, dG, _ = loss_and_feature_grads(F, G, 2, STAB)
    h = 1e-5
    worst = 0.0
    for i in range(0, 40, 7):
        for j in range(2):
            for M, dM, is_f in ((F, dF, True), (G, dG, False)):
                Mp, Mm = M.copy(), M.copy()
                Mp[i, j] += h
                Mm[i, j] -= h
                lp = loss_and_feature_grads(Mp if is_f else F, G if is_f else Mp,
                                            2, STAB)[0]
                lm = loss_and_feature_grads(Mm if is_f else F, G if is_f else Mm,
                                            2, STAB)[0]
                num = (lp - lm) / (2 * h)
                worst = max(worst, abs(num - dM[i, j])
                            / max(abs(num), abs(dM[i, j]), 1e-8))
    assert worst < 1e-5


def test_loss_grads_stable_under_rank_deficiency():
    # duplicated constant columns make K and L singular
    F = np.ones((30, 2))
    G = np.ones((30, 2))
    loss, dF, dG, _ = loss_and_feature_grads(F, G, 2, STAB)
    assert np.isfinite(loss)
    assert np.isfinite(dF).all() and np.isfinite(dG).all()
    assert loss == pytest.approx(1.0, abs=1e-9)  # relevance of pure constants is 1


def test_loss_shape_validation():
    with pytest.raises(ValueError):
        loss_and_feature_grads(np.ones((5, 2)), np.ones((6, 2)), 2, STAB)
    with pytest.raises(ValueError):
        loss_and_feature_grads(np.ones((5, 2)), np.ones((5, 2)), 3, STAB)


def test_gradient_descent_decreases_loss():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((200, 2))
    y = x @ np.array([[1.0, 0.2], [-0.3, 1.0]]) + 0.1 * rng.standard_normal((200, 2))
    net_f = FeatureNetwork.create((2, 8, 2), rng)
    net_g = FeatureNetwork.create((2, 8, 2), rng)
    losses = []
    for _ in range(50):
        F, G = net_f.forward(x), net_g.forward(y)
        l, dF, dG, _ = loss_and_feature_grads(F, G, 2, STAB)
        losses.append(l)
        for net, batch, d in ((net_f, x, dF), (net_g, y, dG)):
            g = net.backprop(batch, d)
            for w, gw in zip(net.weights, g.weights):
                w -= 0.05 * gw
            for b, gb in zip(net.biases, g.biases):
                b -= 0.05 * gb
    assert losses[-1] < losses[0]
