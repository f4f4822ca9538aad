"""Reverse-mode array autodiff with scoped gradient recording.

A ``Tensor`` wraps a numpy array. Operations (see ``ops``) record a tape
node holding the parent tensors and a vector-Jacobian closure, but only
while gradient recording is enabled and at least one parent requires a
gradient. Inside a ``no_grad()`` region nothing is recorded, so values
produced there carry no tape edges: a later ``backward`` sees them as
constants and quantities consumed only inside the region get exactly zero
gradient.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


def grad_enabled() -> bool:
    """Whether operations currently record tape nodes."""
    return _GRAD_ENABLED


@contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Node:
    """One tape entry: the parent tensors and the local vjp."""

    __slots__ = ("parents", "vjp")

    def __init__(self, parents, vjp):
        self.parents = parents
        self.vjp = vjp


class Tensor:
    """Array value with an optional gradient edge into the tape."""

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def detach(self) -> "Tensor":
        """Same values, no tape edges, no gradient requirement."""
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data.item())

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"


def record(out_data: np.ndarray, parents, vjp) -> Tensor:
    """Wrap an op result, recording a tape node when tracking applies."""
    out = Tensor(out_data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.node = Node(tuple(parents), vjp)
    return out


def backward(root: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate d(root)/d(leaf) into ``.grad`` of every reachable leaf.

    Leaves are tensors with ``requires_grad`` and no tape node (parameters,
    or inputs explicitly marked). Gradients of intermediate tensors are
    held only transiently. Accumulation is purely functional (never
    in place), so vjps may safely return aliases of saved arrays.
    """
    if seed is None:
        seed = np.ones_like(root.data)
    if root.node is None:
        if root.requires_grad:
            root.grad = seed if root.grad is None else root.grad + seed
        return

    # Iterative postorder DFS: children land before consumers, so the
    # reversed list processes each tensor after all of its uses.
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            topo.append(t)
            continue
        if id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        for p in t.node.parents:
            if p.node is not None and id(p) not in visited:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(root): seed}
    for t in reversed(topo):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        parent_grads = t.node.vjp(g)
        for p, pg in zip(t.node.parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if p.node is None:
                p.grad = pg if p.grad is None else p.grad + pg
            else:
                held = grads.get(id(p))
                grads[id(p)] = pg if held is None else held + pg
