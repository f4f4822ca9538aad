"""Tape mechanics: recording, scoping, backward accumulation."""

import numpy as np
import pytest

from tinyrecurse import ops
from tinyrecurse.tape import Tensor, backward, grad_enabled, no_grad

from helpers import central_difference, max_rel_err


def _loss_of(t):
    # cheap scalar: sum via matmul with ones
    ones = Tensor(np.ones((t.shape[-1], 1)))
    flat = ops.reshape(t, (-1, t.shape[-1]))
    s = ops.matmul(flat, ones)
    return ops.matmul(ops.reshape(s, (1, -1)), Tensor(np.ones((s.size, 1))))


def test_no_grad_region_records_no_edges():
    w = Tensor(np.ones((3, 3)), requires_grad=True)
    x = Tensor(np.arange(9.0).reshape(3, 3))
    with no_grad():
        assert not grad_enabled()
        h = ops.matmul(x, w)
    assert h.node is None and not h.requires_grad
    # consuming h afterwards treats it as a constant
    out = ops.matmul(h, w)
    backward(_loss_of(out))
    assert w.grad is not None
    assert np.all(np.isfinite(w.grad))


def test_grad_of_value_used_only_inside_no_grad_is_exactly_zero():
    w = Tensor(np.full((2, 2), 0.5), requires_grad=True)
    v = Tensor(np.ones((2, 2)), requires_grad=True)
    x = Tensor(np.eye(2))
    with no_grad():
        h = ops.matmul(x, v)  # v consumed only here
    out = ops.matmul(h, w)
    backward(_loss_of(out))
    assert v.grad is None  # structurally zero: no tape edge at all
    assert w.grad is not None


def test_detach_severs_edges():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    x = Tensor(np.eye(2))
    h = ops.matmul(x, w)
    assert h.node is not None
    d = h.detach()
    assert d.node is None and not d.requires_grad
    assert d.data is h.data  # values shared, no copy


def test_backward_accumulates_over_reuse():
    a = Tensor(np.array([[2.0]]), requires_grad=True)
    out = ops.add(ops.scale(a, 3.0), ops.scale(a, 4.0))
    backward(out)
    assert a.grad.item() == 7.0


def test_backward_diamond_matches_finite_differences():
    rng = np.random.default_rng(0)
    a = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((4, 4)), requires_grad=True)

    def forward():
        h = ops.matmul(a, b)
        k = ops.add(h, a)
        return ops.matmul(k, h)

    loss = _loss_of(forward())
    backward(loss)
    fd = central_difference(lambda: _loss_of(forward()).item(), [a.data, b.data])
    assert max_rel_err(a.grad, fd[0]) < 1e-6
    assert max_rel_err(b.grad, fd[1]) < 1e-6


def test_add_broadcast_unbroadcasts_grad():
    a = Tensor(np.ones((2, 3, 4)), requires_grad=True)
    b = Tensor(np.ones((2, 1, 4)), requires_grad=True)
    out = ops.add(a, b)
    backward(out, seed=np.full((2, 3, 4), 2.0))
    assert a.grad.shape == (2, 3, 4)
    assert b.grad.shape == (2, 1, 4)
    assert np.all(b.grad == 6.0)


def test_embedding_scatter_grad():
    table = Tensor(np.zeros((5, 3)), requires_grad=True)
    ids = np.array([[0, 1, 1], [4, 1, 0]])
    out = ops.embedding(table, ids)
    assert out.shape == (2, 3, 3)
    backward(out, seed=np.ones((2, 3, 3)))
    # row 1 was gathered three times
    assert np.all(table.grad[1] == 3.0)
    assert np.all(table.grad[4] == 1.0)
    assert np.all(table.grad[2] == 0.0)


def test_nested_no_grad_restores_state():
    assert grad_enabled()
    with no_grad():
        with no_grad():
            assert not grad_enabled()
        assert not grad_enabled()
    assert grad_enabled()


@pytest.mark.parametrize("op_name", ["rmsnorm", "silu_mul", "softmax_last", "mean_axis1"])
def test_op_grads_match_finite_differences(op_name):
    rng = np.random.default_rng(7)
    x = Tensor(rng.standard_normal((3, 6)), requires_grad=True)
    w = Tensor(rng.standard_normal(6) * 0.5 + 1.0, requires_grad=True)
    b3 = Tensor(rng.standard_normal((2, 4, 6)), requires_grad=True)

    if op_name == "rmsnorm":
        fwd = lambda: ops.rmsnorm(x, w, 1e-6)
        leaves = [x, w]
    elif op_name == "silu_mul":
        y = Tensor(rng.standard_normal((3, 6)), requires_grad=True)
        fwd = lambda: ops.silu_mul(x, y)
        leaves = [x, y]
    elif op_name == "softmax_last":
        fwd = lambda: ops.softmax_last(x)
        leaves = [x]
    else:
        fwd = lambda: ops.mean_axis1(b3)
        leaves = [b3]

    seed = np.asarray(rng.standard_normal(fwd().shape))
    for leaf in leaves:
        leaf.grad = None
    backward(fwd(), seed=seed.copy())
    fd = central_difference(lambda: float(np.sum(fwd().data * seed)), [l.data for l in leaves])
    for leaf, g in zip(leaves, fd):
        assert max_rel_err(leaf.grad, g) < 1e-5


def test_rotary_grad_and_norm_preservation():
    rng = np.random.default_rng(3)
    L, dh = 5, 6
    pos = np.arange(L)[:, None]
    freqs = 1.0 / 10000.0 ** (np.arange(0, dh, 2) / dh)
    cos, sin = np.cos(pos * freqs), np.sin(pos * freqs)
    x = Tensor(rng.standard_normal((2, 3, L, dh)), requires_grad=True)
    out = ops.rotary(x, cos, sin)
    # rotations preserve per-position norms
    assert np.allclose(
        np.linalg.norm(out.data, axis=-1), np.linalg.norm(x.data, axis=-1)
    )
    seed = rng.standard_normal(out.shape)
    backward(out, seed=seed.copy())
    fd = central_difference(
        lambda: float(np.sum(ops.rotary(Tensor(x.data), cos, sin).data * seed)), [x.data]
    )
    assert max_rel_err(x.grad, fd[0]) < 1e-6
