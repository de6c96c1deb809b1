"""Finite-difference checks for every primitive in the autodiff engine."""

import numpy as np
import pytest

from stlab import autodiff as ad
from stlab.autodiff import Tensor


def fd_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of one array."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * eps)
    return grad


def check(build, x: np.ndarray, rtol: float = 1e-6):
    """Compare analytic grad of scalar-valued ``build(Tensor)`` against FD."""
    t = Tensor(x.copy(), requires_grad=True)
    loss = build(t)
    loss.backward()
    numeric = fd_grad(lambda arr: build(Tensor(arr.copy())).item(), x.copy())
    np.testing.assert_allclose(t.grad, numeric, rtol=rtol, atol=1e-8)


RNG = np.random.default_rng(42)


def test_add_with_broadcasting():
    x = RNG.normal(size=(3, 1))
    other = Tensor(RNG.normal(size=(1, 4)))
    check(lambda t: (t + other).sum(), x)


def test_mul_with_broadcasting():
    x = RNG.normal(size=(2, 3))
    other = Tensor(RNG.normal(size=(3,)))
    check(lambda t: (t * other).sum(), x)


def test_power():
    x = RNG.uniform(0.5, 2.0, size=(4,))
    check(lambda t: (t ** 3).sum(), x)
    check(lambda t: (t ** -0.5).sum(), x)


def test_matmul_both_sides():
    a = RNG.normal(size=(3, 4))
    b = RNG.normal(size=(4, 2))
    check(lambda t: (t @ Tensor(b)).sum(), a)
    check(lambda t: (Tensor(a) @ t).sum(), b)


def test_matmul_batched_with_broadcast():
    a = RNG.normal(size=(2, 3, 4))
    b = RNG.normal(size=(4, 5))  # broadcasts over the batch axis
    check(lambda t: (t @ Tensor(b)).sum(), a)
    check(lambda t: (Tensor(a) @ t).sum(), b)


def test_exp_log():
    x = RNG.uniform(0.2, 3.0, size=(5,))
    check(lambda t: ad.exp(t).sum(), x)
    check(lambda t: ad.log(t).sum(), x)


def test_relu_away_from_kink():
    x = RNG.normal(size=(6,))
    x[np.abs(x) < 0.1] = 0.5
    check(lambda t: ad.relu(t).sum(), x)


def test_reshape_and_swapaxes():
    x = RNG.normal(size=(2, 6))
    w1 = Tensor(RNG.normal(size=(3, 4)))
    w2 = Tensor(RNG.normal(size=(6, 2)))
    check(lambda t: (t.reshape(3, 4) * w1).sum(), x)
    check(lambda t: (t.swapaxes(0, 1) * w2).sum(), x)


@pytest.mark.parametrize("axis,keepdims", [(None, False), (0, False), (1, True),
                                           (-1, False)])
def test_sum_axes(axis, keepdims):
    x = RNG.normal(size=(3, 4))
    w = Tensor(RNG.normal(size=np.sum(x, axis=axis, keepdims=keepdims).shape))
    check(lambda t: (t.sum(axis=axis, keepdims=keepdims) * w).sum(), x)


def test_mean_axes():
    x = RNG.normal(size=(3, 4))
    check(lambda t: t.mean(), x)
    w = Tensor(RNG.normal(size=(4,)))
    check(lambda t: (t.mean(axis=0) * w).sum(), x)


def test_log_softmax():
    x = RNG.normal(size=(2, 5))
    w = Tensor(RNG.normal(size=(2, 5)))
    check(lambda t: (ad.log_softmax(t, axis=-1) * w).sum(), x)
    rows = ad.log_softmax(Tensor(x), axis=-1).data
    np.testing.assert_allclose(np.exp(rows).sum(axis=-1), 1.0, atol=1e-12)


def test_softmax():
    x = RNG.normal(size=(3, 4))
    w = Tensor(RNG.normal(size=(3, 4)))
    check(lambda t: (ad.softmax(t, axis=-1) * w).sum(), x)


def test_embedding_gradient_scatters():
    table = RNG.normal(size=(5, 3))
    ids = np.array([[0, 2, 2], [4, 0, 1]])
    w = Tensor(RNG.normal(size=(2, 3, 3)))
    check(lambda t: (ad.embedding(t, ids) * w).sum(), table)


def test_gather_last():
    x = RNG.normal(size=(2, 4, 5))
    idx = np.array([[0, 4, 2, 1], [3, 3, 0, 2]])
    check(lambda t: ad.gather_last(t, idx).sum(), x)


def test_division_by_tensor():
    x = RNG.uniform(1.0, 2.0, size=(3,))
    other = Tensor(RNG.uniform(1.0, 2.0, size=(3,)), requires_grad=True)
    loss = (Tensor(x, requires_grad=True) / other).sum()
    loss.backward()
    assert other.grad is not None


def test_reuse_accumulates():
    t = Tensor(np.array([3.0]), requires_grad=True)
    (t * t).sum().backward()
    np.testing.assert_allclose(t.grad, [6.0])


def test_repeated_backward_accumulates_across_graphs():
    t = Tensor(np.array([2.0]), requires_grad=True)
    (t * 3.0).sum().backward()
    (t * 3.0).sum().backward()
    np.testing.assert_allclose(t.grad, [6.0])


def test_detach_blocks_gradient():
    t = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (t.detach() * t).sum().backward()
    np.testing.assert_allclose(t.grad, t.data)  # only the live branch


def test_constants_never_get_grad():
    c = Tensor(np.array([1.0]))
    t = Tensor(np.array([2.0]), requires_grad=True)
    (c * t).sum().backward()
    assert c.grad is None


def test_constant_only_graph_is_pruned():
    out = Tensor(np.array([1.0])) * Tensor(np.array([2.0]))
    assert not out.requires_grad


def test_backward_needs_scalar():
    t = Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        (t * 2.0).backward()


def test_deep_chain_does_not_recurse():
    t = Tensor(np.array([1.0]), requires_grad=True)
    x = t
    for _ in range(5000):
        x = x + 1.0
    x.sum().backward()
    np.testing.assert_allclose(t.grad, [1.0])


def test_diamond_graph_visits_each_node_once():
    t = Tensor(np.array([2.0]), requires_grad=True)
    a = t * 3.0
    (a + a).sum().backward()
    np.testing.assert_allclose(t.grad, [6.0])
