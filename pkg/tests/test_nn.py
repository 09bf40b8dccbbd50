import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from advsac.errors import DimensionError, DomainError, ProtocolError
from advsac.nn import MLP, Adam, check_gradients, gradcheck, opt_step


def _set(net, params):
    net.params = [np.asarray(p, dtype=np.float64) for p in params]
    return net


def test_zero_net_outputs_zero():
    net = MLP([3, 4, 2], seed=0)
    _set(net, [np.zeros_like(p) for p in net.params])
    np.testing.assert_array_equal(net.forward(np.array([1.0, -2.0, 3.0])), [0.0, 0.0])


def test_identity_layer():
    net = _set(MLP([3, 3], seed=0), [np.eye(3), np.zeros(3)])
    x = np.array([0.5, -1.5, 2.0])
    np.testing.assert_array_equal(net.forward(x), x)


@pytest.mark.parametrize("activation,hidden", [
    ("relu", [max(0.5 * 1 + 0.25 * -1 + 0.1, 0), max(-1.0 * 1 + 2.0 * -1 - 0.2, 0)]),
    ("tanh", [np.tanh(0.5 * 1 + 0.25 * -1 + 0.1), np.tanh(-1.0 * 1 + 2.0 * -1 - 0.2)]),
])
def test_hand_computed_2_2_1(activation, hidden):
    # hidden unit j = act(sum_i x_i W[i, j] + b_j); output = 3*h0 - 0.5*h1 + 0.3
    W0 = np.array([[0.5, -1.0], [0.25, 2.0]])
    net = _set(MLP([2, 2, 1], activation, seed=0), [W0, [0.1, -0.2], [[3.0], [-0.5]], [0.3]])
    expected = 3.0 * hidden[0] - 0.5 * hidden[1] + 0.3
    assert net.forward(np.array([1.0, -1.0]))[0] == pytest.approx(expected, abs=1e-15)


def test_param_count():
    net = MLP([4, 8, 8, 2], seed=0)
    assert net.n_params == (4 + 1) * 8 + (8 + 1) * 8 + (8 + 1) * 2


def test_forward_pure_and_seeded():
    a, b = MLP([3, 5, 2], "tanh", seed=9), MLP([3, 5, 2], "tanh", seed=9)
    for p, q in zip(a.params, b.params):
        np.testing.assert_array_equal(p, q)
    x = np.random.default_rng(0).normal(size=(7, 3))
    np.testing.assert_array_equal(a.forward(x), a.forward(x))
    for p in a.params[::2]:
        bound = 1.0 / np.sqrt(p.shape[0])
        assert np.all(np.abs(p) <= bound)


def test_forward_batch_matches_single():
    net = MLP([3, 6, 2], seed=1)
    x = np.random.default_rng(1).normal(size=(4, 3))
    batch = net.forward(x)
    for i in range(4):
        np.testing.assert_allclose(net.forward(x[i]), batch[i], rtol=1e-14)


def test_forward_dimension_error():
    with pytest.raises(DimensionError):
        MLP([3, 2], seed=0).forward(np.zeros(4))


def test_backward_linear_case():
    net = _set(MLP([3, 1], seed=0), [np.ones((3, 1)), np.zeros(1)])
    x = np.array([0.2, -0.7, 1.1])
    net.forward(x)
    grads, gx = net.backward(np.array([1.0]))
    np.testing.assert_array_equal(grads[0][:, 0], x)
    np.testing.assert_array_equal(grads[1], [1.0])
    np.testing.assert_array_equal(gx, np.ones(3))


def test_backward_dead_path():
    net = MLP([3, 4, 1], "relu", seed=2)
    net.params[2][:] = 0.0
    net.forward(np.array([1.0, 2.0, 3.0]))
    grads, _ = net.backward(np.array([1.0]))
    np.testing.assert_array_equal(grads[0], 0.0)
    np.testing.assert_array_equal(grads[1], 0.0)


def test_backward_requires_forward():
    with pytest.raises(ProtocolError):
        MLP([2, 2], seed=0).backward(np.ones(2))


@pytest.mark.parametrize("activation", ["relu", "tanh"])
def test_4_8_8_2_finite_differences(activation):
    rng = np.random.default_rng(4)
    net = MLP([4, 8, 8, 2], activation, seed=rng)
    x = rng.normal(size=(5, 4))
    assert check_gradients(net, x, rng.normal(size=(5, 2))) < 1e-4


# -- optimizer ------------------------------------------------------------------------

def test_zero_gradient_leaves_params():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [p.copy() for p in params]
    opt = Adam.for_params(params, lr=0.1)
    opt_step(params, [np.zeros(2), np.zeros((1, 1))], opt)
    for p, q in zip(params, before):
        np.testing.assert_array_equal(p, q)
    assert opt.t == 1


@given(st.floats(1e-3, 1e3), st.sampled_from([-1.0, 1.0]))
def test_first_step_magnitude_is_lr(g, sign):
    # step 1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
    params = [np.zeros(3)]
    opt = Adam.for_params(params, lr=0.01)
    opt_step(params, [np.full(3, sign * g)], opt)
    np.testing.assert_allclose(params[0], -sign * 0.01 * g / (g + 1e-8), rtol=1e-12)
    assert np.all(np.abs(params[0]) == pytest.approx(0.01, rel=1e-4))


def test_scale_invariance():
    params = [np.zeros(2)]
    opt = Adam.for_params(params, lr=1e-3)
    for _ in range(100):
        opt_step(params, [np.array([0.3, 0.6])], opt)
    assert params[0][0] == pytest.approx(params[0][1], rel=1e-6)


def test_opt_step_shape_mismatch():
    params = [np.zeros(3)]
    with pytest.raises(DimensionError):
        opt_step(params, [np.zeros(2)], Adam.for_params(params))


def test_opt_step_count_increases():
    params = [np.zeros(1)]
    opt = Adam.for_params(params)
    for k in range(1, 4):
        opt.step(params, [np.ones(1)])
        assert opt.t == k


# -- gradcheck ------------------------------------------------------------------------

def test_gradcheck_passes():
    report = gradcheck(n_trials=10, tolerance=1e-4, seed=0)
    assert report.passed and report.trials == 10 and len(report.architectures) == 10
    assert report.max_rel_error < 1e-6


class _Corrupted(MLP):
    def backward(self, grad_output):
        grads, gx = super().backward(grad_output)
        grads[0] = grads[0].copy()
        grads[0].flat[0] *= 1.1
        return grads, gx


def test_gradcheck_detects_corruption():
    report = gradcheck(n_trials=3, tolerance=1e-4, seed=0, net_factory=_Corrupted)
    assert not report.passed
    assert report.max_rel_error > 1e-2


def test_gradcheck_zero_tolerance_fails():
    assert not gradcheck(n_trials=2, tolerance=0.0).passed


def test_gradcheck_needs_trials():
    with pytest.raises(DomainError):
        gradcheck(n_trials=0)
