"""Gradient checks for every differentiable op against central differences."""
import numpy as np
import pytest

import cascade_gnn.autograd as ag
from cascade_gnn.autograd import SELU_ALPHA, SELU_LAMBDA, Tensor

from helpers import central_difference_grads, relative_error

TOL = 1e-4


def check_op(build, arrays, seed_note=""):
    """build(tensors) -> scalar Tensor; compares grads to finite differences."""
    tensors = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    loss = build(tensors)
    loss.backward()
    analytic = {k: t.grad for k, t in tensors.items()}

    def f():
        return build({k: Tensor(t.data) for k, t in tensors.items()}).item()

    numeric = central_difference_grads(f, {k: t.data for k, t in tensors.items()})
    err = relative_error([analytic[k] for k in arrays], [numeric[k] for k in arrays])
    assert err <= TOL, f"{seed_note} gradient mismatch: {err}"


def weighted_sum(x, rng):
    w = Tensor(rng.normal(size=x.data.shape))
    return ag.sum_all(ag.mul(x, w))


@pytest.mark.parametrize("seed", range(10))
def test_grad_elementwise_ops(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 4)) + 3.0  # keep divisors away from zero
    check_op(lambda t: ag.sum_all(ag.mul(ag.add(t["a"], t["b"]), t["a"])), {"a": a, "b": b})
    check_op(lambda t: ag.sum_all(ag.div(t["a"], t["b"])), {"a": a, "b": b})
    check_op(lambda t: ag.sum_all(ag.sub(t["a"], ag.neg(t["b"]))), {"a": a, "b": b})
    check_op(lambda t: ag.sum_all(ag.exp(t["a"])), {"a": a})


@pytest.mark.parametrize("seed", range(10))
def test_grad_broadcast_bias(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 3))
    b = rng.normal(size=(1, 3))
    check_op(lambda t: weighted_sum(ag.add(t["x"], t["b"]), np.random.default_rng(0)),
             {"x": x, "b": b})


@pytest.mark.parametrize("seed", range(10))
def test_grad_matmul(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(3, 5))
    check_op(lambda t: weighted_sum(ag.matmul(t["a"], t["b"]), np.random.default_rng(1)),
             {"a": a, "b": b})


@pytest.mark.parametrize("seed", range(10))
def test_grad_nonlinearities(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 5)) * 2.0
    for op in (ag.selu, ag.relu, lambda v: ag.leaky_relu(v, 0.2)):
        check_op(lambda t, op=op: weighted_sum(op(t["x"]), np.random.default_rng(2)),
                 {"x": x})


@pytest.mark.parametrize("seed", range(10))
def test_grad_gather_segment_slice(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 3))
    idx = rng.integers(0, 5, size=8)
    seg = np.sort(rng.integers(0, 4, size=8))
    check_op(lambda t: weighted_sum(ag.gather_rows(t["x"], idx), np.random.default_rng(3)),
             {"x": x})
    check_op(lambda t: weighted_sum(
        ag.segment_sum(ag.gather_rows(t["x"], idx), seg, 4), np.random.default_rng(4)),
        {"x": x})
    check_op(lambda t: weighted_sum(ag.slice_rows(t["x"], 1, 4), np.random.default_rng(5)),
             {"x": x})


@pytest.mark.parametrize("seed", range(10))
def test_grad_segment_softmax(seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(7, 1))
    seg = np.array([0, 0, 0, 1, 1, 2, 2])
    check_op(lambda t: weighted_sum(ag.segment_softmax(t["x"], seg, 3),
                                    np.random.default_rng(6)),
             {"x": logits})


@pytest.mark.parametrize("seed", range(10))
def test_grad_pooling_ops(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 8))
    check_op(lambda t: weighted_sum(ag.pair_mean_channels(t["x"], 2),
                                    np.random.default_rng(7)),
             {"x": x})
    check_op(lambda t: weighted_sum(ag.mean_axis0(t["x"]), np.random.default_rng(8)),
             {"x": x})


def test_selu_reference_values():
    x = Tensor(np.array([[0.0, 1.0, -50.0]]))
    y = ag.selu(x).data.reshape(-1)
    assert y[0] == 0.0
    assert y[1] == pytest.approx(SELU_LAMBDA, abs=1e-12)
    # asymptote -lambda*alpha for x -> -inf
    assert y[2] == pytest.approx(-SELU_LAMBDA * SELU_ALPHA, abs=1e-9)


def test_selu_derivative_at_one_is_lambda():
    x = Tensor(np.array([[1.0]]), requires_grad=True)
    ag.sum_all(ag.selu(x)).backward()
    assert x.grad[0, 0] == pytest.approx(SELU_LAMBDA, abs=1e-12)


def test_mean_axis0_gradient_is_one_over_n():
    x = Tensor(np.arange(12.0).reshape(4, 3), requires_grad=True)
    ag.sum_all(ag.mean_axis0(x)).backward()
    assert np.allclose(x.grad, 1.0 / 4.0)


def test_backward_twice_raises():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    y = ag.sum_all(ag.mul(x, x))
    y.backward()
    with pytest.raises(RuntimeError):
        y.backward()


def test_backward_requires_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        ag.mul(x, x).backward()


def test_rank_limit():
    with pytest.raises(ValueError):
        Tensor(np.zeros((2, 2, 2)))


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        ag.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_gradients_accumulate_across_uses():
    x = Tensor(np.array([[3.0]]), requires_grad=True)
    y = ag.sum_all(ag.add(ag.mul(x, x), x))  # d/dx (x^2 + x) = 2x + 1
    y.backward()
    assert x.grad[0, 0] == pytest.approx(7.0)
