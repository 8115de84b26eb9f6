"""Reverse-mode autodiff over numpy arrays.

Every differentiable computation in this package flows through ``Tensor``:
a float64 numpy value plus the tape bookkeeping needed to pull a scalar
loss gradient back to named parameters. The op vocabulary is small and
closed on purpose: linear maps, pointwise activations, concatenation and
stacking, masked reductions, the softmax family, and the two losses.
Higher modules compose only these ops, so a finite-difference check of
this module covers the whole model zoo.

Double precision throughout; the finite-difference oracle needs it.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

Array = np.ndarray


class ShapeError(ValueError):
    """Operand shapes are inconsistent with the declared dimensions."""


class ContractError(ValueError):
    """An operation was called outside its contract (e.g. non-scalar loss)."""


def _as_array(x) -> Array:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum gradient ``g`` down to ``shape`` (undo numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    """A node on the computation tape.

    ``data`` is the forward value; ``grad`` is filled by ``backward()`` on
    the loss node. Constants (inputs, masks, one-hots) are plain leaf
    Tensors; parameters are leaf Tensors registered in a ParamGroup.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents: tuple = ()):
        self.data = _as_array(data)
        self.grad: Array | None = None
        self._parents = parents
        self._backward = None

    # -- tape ------------------------------------------------------------

    def _accum(self, g: Array) -> None:
        # Accumulation is always out-of-place, so sharing/broadcast views are safe.
        if self.grad is None:
            if g.shape != self.data.shape:
                g = np.broadcast_to(g, self.data.shape)
            self.grad = g
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar loss; fills ``grad`` on the tape."""
        if self.data.size != 1:
            raise ContractError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # -- shape utilities ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape), (self,))
        src_shape = self.data.shape

        def _bw():
            self._accum(out.grad.reshape(src_shape))

        out._backward = _bw
        return out

    def transpose(self, axes=None) -> "Tensor":
        out = Tensor(self.data.transpose(axes), (self,))
        inv = None if axes is None else tuple(np.argsort(axes))

        def _bw():
            self._accum(out.grad.transpose(inv))

        out._backward = _bw
        return out

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, (self, other))

        def _bw():
            self._accum(_unbroadcast(out.grad, self.data.shape))
            other._accum(_unbroadcast(out.grad, other.data.shape))

        out._backward = _bw
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = Tensor(-self.data, (self,))

        def _bw():
            self._accum(-out.grad)

        out._backward = _bw
        return out

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, (self, other))

        def _bw():
            self._accum(_unbroadcast(out.grad * other.data, self.data.shape))
            other._accum(_unbroadcast(out.grad * self.data, other.data.shape))

        out._backward = _bw
        return out

    __rmul__ = __mul__

    def __matmul__(self, other: "Tensor") -> "Tensor":
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError("matmul is 2-D only; reshape first")
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(f"matmul inner dims differ: {self.data.shape} @ {other.data.shape}")
        out = Tensor(self.data @ other.data, (self, other))

        def _bw():
            self._accum(out.grad @ other.data.T)
            other._accum(self.data.T @ out.grad)

        out._backward = _bw
        return out

    # -- activations ---------------------------------------------------------

    def tanh(self) -> "Tensor":
        out = Tensor(np.tanh(self.data), (self,))

        def _bw():
            self._accum(out.grad * (1.0 - out.data * out.data))

        out._backward = _bw
        return out

    def relu(self) -> "Tensor":
        mask = self.data > 0
        out = Tensor(np.where(mask, self.data, 0.0), (self,))

        def _bw():
            self._accum(out.grad * mask)

        out._backward = _bw
        return out

    def sigmoid(self) -> "Tensor":
        out = Tensor(expit(self.data), (self,))

        def _bw():
            self._accum(out.grad * out.data * (1.0 - out.data))

        out._backward = _bw
        return out

    def exp(self) -> "Tensor":
        out = Tensor(np.exp(self.data), (self,))

        def _bw():
            self._accum(out.grad * out.data)

        out._backward = _bw
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), (self,))

        def _bw():
            self._accum(out.grad / self.data)

        out._backward = _bw
        return out

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def _bw():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape))

        out._backward = _bw
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def tensor(x) -> Tensor:
    """Wrap a constant (no-gradient leaf)."""
    return Tensor(x)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


# -- structural ops -----------------------------------------------------------


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw():
        g = np.moveaxis(out.grad, axis, 0)
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t._accum(np.moveaxis(g[lo:hi], 0, axis))

    out._backward = _bw
    return out


def stack(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.stack([t.data for t in tensors], axis=axis), tuple(tensors))

    def _bw():
        g = np.moveaxis(out.grad, axis, 0)
        for i, t in enumerate(tensors):
            t._accum(g[i])

    out._backward = _bw
    return out


def expand(t: Tensor, axis: int, size: int) -> Tensor:
    """Insert a new axis of length ``size`` (broadcast view of ``t``)."""
    ed = np.expand_dims(t.data, axis)
    idx = axis if axis >= 0 else ed.ndim + axis
    shape = list(ed.shape)
    shape[idx] = size
    out = Tensor(np.broadcast_to(ed, shape), (t,))

    def _bw():
        t._accum(out.grad.sum(axis=idx))

    out._backward = _bw
    return out


# -- softmax family ------------------------------------------------------------


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    x = t.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, (t,))

    def _bw():
        g = out.grad
        t._accum(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    out._backward = _bw
    return out


def log_softmax(t: Tensor, axis: int = -1) -> Tensor:
    x = t.data
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = Tensor(shifted - lse, (t,))
    s = np.exp(out.data)

    def _bw():
        g = out.grad
        t._accum(g - s * g.sum(axis=axis, keepdims=True))

    out._backward = _bw
    return out


def masked_softmax(t: Tensor, mask: Array, axis: int) -> Tensor:
    """Softmax restricted to ``mask``-true entries; all-masked slices give zeros."""
    m = np.asarray(mask, dtype=bool)
    if m.shape != t.data.shape:
        m = np.broadcast_to(m, t.data.shape)
    x = np.where(m, t.data, -np.inf)
    mx = x.max(axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(x - mx)
    e = np.where(m, e, 0.0)
    denom = e.sum(axis=axis, keepdims=True)
    s = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
    out = Tensor(s, (t,))

    def _bw():
        g = out.grad
        t._accum(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    out._backward = _bw
    return out


def masked_max(t: Tensor, mask: Array, axis: int) -> Tensor:
    """Elementwise max over ``mask``-true entries along ``axis``; empty slices give 0."""
    m = np.asarray(mask, dtype=bool)
    if m.shape != t.data.shape:
        m = np.broadcast_to(m, t.data.shape)
    filled = np.where(m, t.data, -np.inf)
    mx = filled.max(axis=axis)
    nonempty = np.isfinite(mx)
    out_data = np.where(nonempty, mx, 0.0)
    arg = np.expand_dims(filled.argmax(axis=axis), axis)
    out = Tensor(out_data, (t,))

    def _bw():
        g = np.where(nonempty, out.grad, 0.0)
        buf = np.zeros_like(t.data)
        np.put_along_axis(buf, arg, np.expand_dims(g, axis), axis=axis)
        t._accum(buf)

    out._backward = _bw
    return out


# -- losses ---------------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Elementwise binary cross-entropy on raw logits (numerically stable)."""
    y = _as_array(targets)
    x = logits.data
    loss = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    out = Tensor(loss, (logits,))

    def _bw():
        logits._accum(out.grad * (expit(x) - y))

    out._backward = _bw
    return out


def cross_entropy_with_logits(logits: Tensor, onehot, axis: int = -1) -> Tensor:
    """Softmax cross-entropy per element; ``onehot`` selects the true class."""
    ls = log_softmax(logits, axis=axis)
    return -(ls * Tensor(onehot)).sum(axis=axis)


def squared_error(pred: Tensor, targets) -> Tensor:
    d = pred - Tensor(targets)
    return d * d


# -- parameters -------------------------------------------------------------------


class ParamGroup:
    """One named linear layer's parameters: weights (d_out, d_in) and bias (d_out,)."""

    __slots__ = ("name", "w", "b")

    def __init__(self, name: str, w: Tensor, b: Tensor):
        if w.data.ndim != 2 or b.data.ndim != 1 or w.data.shape[0] != b.data.shape[0]:
            raise ShapeError(f"param group {name}: weights {w.data.shape} vs bias {b.data.shape}")
        if not (np.isfinite(w.data).all() and np.isfinite(b.data).all()):
            raise ContractError(f"param group {name}: non-finite entries")
        self.name = name
        self.w = w
        self.b = b

    @property
    def d_out(self) -> int:
        return self.w.data.shape[0]

    @property
    def d_in(self) -> int:
        return self.w.data.shape[1]


def param_group(name: str, d_out: int, d_in: int, rng: np.random.Generator) -> ParamGroup:
    """Fresh layer: weights uniform in [-1/sqrt(d_in), +1/sqrt(d_in)], zero bias.

    Zero bias makes gated blends start from the fresh-input side (scalar gate
    output 0 at the zero context), which is the intended cold-start behavior.
    """
    bound = 1.0 / np.sqrt(d_in)
    w = Tensor(rng.uniform(-bound, bound, size=(d_out, d_in)))
    b = Tensor(np.zeros(d_out))
    return ParamGroup(name, w, b)


def linear(p: ParamGroup, x: Tensor) -> Tensor:
    """Affine map ``x @ W.T + b`` applied along the last axis of ``x``."""
    if x.data.shape[-1] != p.d_in:
        raise ShapeError(f"{p.name}: input last dim {x.data.shape[-1]} != d_in {p.d_in}")
    lead = x.data.shape[:-1]
    flat = x.reshape((-1, p.d_in)) if x.data.ndim != 2 else x
    y = flat @ p.w.transpose() + p.b
    if x.data.ndim != 2:
        y = y.reshape(lead + (p.d_out,))
    return y


Params = dict[str, ParamGroup]
Grads = dict[str, tuple[Array, Array]]


def zero_grads(params: Params) -> None:
    for pg in params.values():
        pg.w.grad = None
        pg.b.grad = None


def grad(loss_fn, params: Params) -> Grads:
    """Exact reverse-mode gradients of a scalar ``loss_fn(params)`` w.r.t. all params."""
    zero_grads(params)
    loss = loss_fn(params)
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ContractError("loss_fn must return a scalar Tensor")
    loss.backward()
    out: Grads = {}
    for name, pg in params.items():
        gw = pg.w.grad if pg.w.grad is not None else np.zeros_like(pg.w.data)
        gb = pg.b.grad if pg.b.grad is not None else np.zeros_like(pg.b.data)
        out[name] = (gw, gb)
    return out


def finite_difference_check(loss_fn, params: Params, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error uses a unit-floored denominator max(1, |a|, |fd|), so the
    check is relative for large gradients and absolute below 1.
    """
    analytic = grad(loss_fn, params)
    worst = 0.0
    for name, pg in params.items():
        for arr, an in ((pg.w.data, analytic[name][0]), (pg.b.data, analytic[name][1])):
            flat_an = an.ravel()
            for i in range(arr.size):
                orig = arr.flat[i]
                arr.flat[i] = orig + eps
                f_plus = float(loss_fn(params).data)
                arr.flat[i] = orig - eps
                f_minus = float(loss_fn(params).data)
                arr.flat[i] = orig
                fd = (f_plus - f_minus) / (2.0 * eps)
                a = flat_an[i]
                err = abs(a - fd) / max(1.0, abs(a), abs(fd))
                if err > worst:
                    worst = err
    return worst
