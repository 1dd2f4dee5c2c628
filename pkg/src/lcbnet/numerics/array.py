"""Reverse-mode differentiable arrays.

The graph is rebuilt on every forward pass. Every op accepts operands with
extra leading axes and broadcasts over them; ``gradcheck`` relies on this to
evaluate many perturbed copies of one parameter in a single forward pass.
"""
import contextlib
import threading

import numpy as np

_state = threading.local()


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph construction in the current thread."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def dropout_rng():
    """Generator for dropout masks in the current thread, or None when dropout is off."""
    return getattr(_state, "dropout_rng", None)


@contextlib.contextmanager
def dropout_scope(rng):
    """Turn dropout on in the current thread, drawing masks from ``rng``."""
    prev = dropout_rng()
    _state.dropout_rng = rng
    try:
        yield
    finally:
        _state.dropout_rng = prev


class DiffArray:
    """Dense float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return DiffArray(self.data)

    def __repr__(self):
        return f"DiffArray(shape={self.shape}, requires_grad={self.requires_grad})"

    def __len__(self):
        return self.data.shape[0]

    # arithmetic sugar; implementations live in ops
    def __add__(self, other):
        return _ops().add(self, other)

    def __radd__(self, other):
        return _ops().add(other, self)

    def __sub__(self, other):
        return _ops().sub(self, other)

    def __rsub__(self, other):
        return _ops().sub(other, self)

    def __mul__(self, other):
        return _ops().mul(self, other)

    def __rmul__(self, other):
        return _ops().mul(other, self)

    def __truediv__(self, other):
        return _ops().div(self, other)

    def __neg__(self):
        return _ops().mul(self, -1.0)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def __rmatmul__(self, other):
        return _ops().matmul(other, self)


class Parameter(DiffArray):
    """A named trainable leaf.

    ``batch_pad`` is the number of singleton axes to place between a stacked
    perturbation axis and the parameter's own axes so the stack broadcasts
    against activations (1 for vectors added to ``[rows x d]`` activations).
    """

    __slots__ = ("name", "batch_pad")

    def __init__(self, name, data, batch_pad=None):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.batch_pad = (1 if self.data.ndim == 1 else 0) if batch_pad is None else batch_pad

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_array(x):
    return x if isinstance(x, DiffArray) else DiffArray(x)


def make_node(data, parents, backward):
    """Wrap ``data`` as the output of an op.

    ``backward(g)`` must return one gradient (or None) per parent, each shaped
    like that parent's data.
    """
    out = DiffArray(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def compute_gradients(loss):
    """Return ``{id(leaf): (leaf, grad)}`` for every trainable leaf under ``loss``.

    Leaf ``.grad`` buffers are left untouched, so separate graphs may run on
    separate threads and be summed afterwards.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            leaves[id(node)] = (node, g)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return leaves


def backward(loss):
    """Accumulate d loss / d leaf into each trainable leaf's ``grad``.

    Repeated calls add to existing buffers; call ``zero_grad`` between steps.
    """
    for leaf, g in compute_gradients(loss).values():
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def _ops():
    from . import ops
    return ops
