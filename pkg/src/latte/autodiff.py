"""Dense float64 tensors with a reverse-mode gradient tape.

A :class:`Tape` records every kernel applied to a tensor that participates
in it. Tensors created without a tape are constants. Kernels are looked up
by name in :data:`KERNELS`; :func:`forward_kernels` is the single entry
point and the module-level helpers (``matmul``, ``sigmoid`` ...) are thin
wrappers around it.

Example::

    tape = Tape()
    x = tape.watch([1.0, 2.0], name="x")
    loss = sum_(x * x)
    grads = backward(loss)
    grads[x.tape_id]          # array([2., 4.])
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Tensor",
    "Tape",
    "KernelError",
    "KERNELS",
    "forward_kernels",
    "backward",
    "finite_diff_gradient",
    "as_tensor",
    "matmul",
    "linear",
    "add",
    "sub",
    "mul",
    "concat",
    "reshape",
    "transpose",
    "slice_",
    "mean",
    "sum_",
    "max_",
    "softmax",
    "sigmoid",
    "tanh",
    "swish",
    "log",
    "exp",
    "depthwise_conv2d",
    "depthwise_conv1d",
    "conv1x1",
    "dropout",
]


class KernelError(ValueError):
    """Raised for shape mismatches, unknown kernels and misuse of tapes."""


_tape_counter = itertools.count()


class Tensor:
    """Value-semantic float64 array, optionally linked to a tape node."""

    __slots__ = ("data", "tape", "tape_id", "name")
    __array_priority__ = 100

    def __init__(self, data, tape: "Tape | None" = None, tape_id: int | None = None,
                 name: str | None = None):
        if type(data) is not np.ndarray or data.dtype != np.float64:
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.tape = tape
        self.tape_id = tape_id
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def __repr__(self) -> str:
        tag = f", tape_id={self.tape_id}" if self.tape is not None else ""
        return f"Tensor(shape={self.shape}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return slice_(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    kind: str
    out_id: int
    inputs: tuple  # tape ids, None for constants
    datas: tuple  # input arrays as seen by the forward pass
    out: np.ndarray
    saved: Any
    attrs: dict


@dataclass
class Tape:
    """Append-only record of kernel applications.

    Leaf tensors are registered with :meth:`watch`. A tape is meant to be
    used for one forward pass and thrown away after :func:`backward`.
    """

    nodes: list = field(default_factory=list)
    leaves: dict = field(default_factory=dict)
    gradients: dict = field(default_factory=dict)

    def _new_id(self) -> int:
        return next(_tape_counter)

    def watch(self, data, name: str | None = None) -> Tensor:
        arr = np.array(data, dtype=np.float64)
        tid = self._new_id()
        t = Tensor(arr, tape=self, tape_id=tid, name=name)
        self.leaves[tid] = t
        return t

    def watch_all(self, arrays: dict) -> dict:
        return {k: self.watch(v, name=k) for k, v in arrays.items()}

    def _record(self, kind, inputs, datas, saved, attrs, out) -> Tensor:
        tid = self._new_id()
        ids = tuple(t.tape_id if t.tape is self else None for t in inputs)
        self.nodes.append(_Node(kind, tid, ids, datas, out, saved, attrs))
        return Tensor(out, tape=self, tape_id=tid)


# ----------------------------------------------------------------------------
# kernels: forward(datas, attrs) -> (out, saved); backward(g, datas, out, saved,
# attrs, needs) -> list of input gradients (None where not needed)
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    forward: Callable
    backward: Callable
    arity: int | None  # None = variadic


KERNELS: dict[str, Kernel] = {}


def _register(name: str, arity: int | None):
    def deco(pair):
        fwd, bwd = pair()
        KERNELS[name] = Kernel(fwd, bwd, arity)
        return pair

    return deco


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _elementwise(kind, op, a, b):
    try:
        return op(a, b)
    except ValueError:
        raise KernelError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _zero_pad(x, pads):
    """Zero-pad the trailing ``len(pads)`` axes by ``p`` on both sides."""
    lead = x.ndim - len(pads)
    shape = x.shape[:lead] + tuple(n + 2 * p for n, p in zip(x.shape[lead:], pads))
    out = np.zeros(shape)
    out[(Ellipsis,) + tuple(slice(p, p + n) for n, p in zip(x.shape[lead:], pads))] = x
    return out


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


@_register("matmul", 2)
def _matmul():
    def fwd(d, attrs):
        a, b = d
        if a.ndim < 2 or b.ndim < 2:
            raise KernelError(f"matmul: operands must be at least 2-D, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise KernelError(
                f"matmul: contraction extents differ ({a.shape[-1]} vs {b.shape[-2]}) "
                f"for shapes {a.shape} @ {b.shape}")
        try:
            return np.matmul(a, b), None
        except ValueError:
            raise KernelError(f"matmul: batch extents {a.shape[:-2]} and {b.shape[:-2]} do not broadcast") from None

    def bwd(g, d, out, saved, attrs, needs):
        a, b = d
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b, -1, -2)), a.shape) if needs[0] else None
        gb = _unbroadcast(np.matmul(np.swapaxes(a, -1, -2), g), b.shape) if needs[1] else None
        return [ga, gb]

    return fwd, bwd


@_register("add", 2)
def _add():
    def fwd(d, attrs):
        return _elementwise("add", np.add, *d), None

    def bwd(g, d, out, saved, attrs, needs):
        return [_unbroadcast(g, x.shape) if n else None for x, n in zip(d, needs)]

    return fwd, bwd


@_register("sub", 2)
def _sub():
    def fwd(d, attrs):
        return _elementwise("sub", np.subtract, *d), None

    def bwd(g, d, out, saved, attrs, needs):
        return [_unbroadcast(g, d[0].shape) if needs[0] else None,
                _unbroadcast(-g, d[1].shape) if needs[1] else None]

    return fwd, bwd


def _mul_pair():
    def fwd(d, attrs):
        return _elementwise("mul", np.multiply, *d), None

    def bwd(g, d, out, saved, attrs, needs):
        a, b = d
        return [_unbroadcast(g * b, a.shape) if needs[0] else None,
                _unbroadcast(g * a, b.shape) if needs[1] else None]

    return fwd, bwd


_register("mul", 2)(_mul_pair)
_register("broadcast_mul", 2)(_mul_pair)


@_register("concat", None)
def _concat():
    def fwd(d, attrs):
        axis = attrs.get("axis", 0)
        ref = d[0]
        for x in d[1:]:
            if x.ndim != ref.ndim or any(
                    p != q for i, (p, q) in enumerate(zip(x.shape, ref.shape))
                    if i != axis % ref.ndim):
                raise KernelError(f"concat: shapes {ref.shape} and {x.shape} differ off axis {axis}")
        return np.concatenate(d, axis=axis), None

    def bwd(g, d, out, saved, attrs, needs):
        axis = attrs.get("axis", 0)
        splits = np.cumsum([x.shape[axis] for x in d])[:-1]
        parts = np.split(g, splits, axis=axis)
        return [p if n else None for p, n in zip(parts, needs)]

    return fwd, bwd


@_register("reshape", 1)
def _reshape():
    def fwd(d, attrs):
        (x,) = d
        shape = tuple(attrs["shape"])
        try:
            return x.reshape(shape), None
        except ValueError:
            raise KernelError(f"reshape: cannot reshape {x.shape} ({x.size} elements) to {shape}") from None

    def bwd(g, d, out, saved, attrs, needs):
        return [g.reshape(d[0].shape)]

    return fwd, bwd


@_register("transpose", 1)
def _transpose():
    def fwd(d, attrs):
        (x,) = d
        axes = attrs.get("axes")
        if axes is not None and sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
            raise KernelError(f"transpose: axes {axes} invalid for shape {x.shape}")
        return np.transpose(x, axes), None

    def bwd(g, d, out, saved, attrs, needs):
        axes = attrs.get("axes")
        inv = None if axes is None else np.argsort([a % g.ndim for a in axes])
        return [np.transpose(g, inv)]

    return fwd, bwd


@_register("slice", 1)
def _slice():
    def fwd(d, attrs):
        (x,) = d
        try:
            return x[attrs["index"]], None
        except IndexError as exc:
            raise KernelError(f"slice: {exc} for shape {x.shape}") from None

    def bwd(g, d, out, saved, attrs, needs):
        full = np.zeros_like(d[0])
        if attrs.get("advanced"):
            np.add.at(full, attrs["index"], g)
        else:
            full[attrs["index"]] = g
        return [full]

    return fwd, bwd


@_register("mean", 1)
def _mean():
    def fwd(d, attrs):
        (x,) = d
        axes = _norm_axes(attrs.get("axis"), x.ndim)
        if any(x.shape[a] == 0 for a in axes):
            raise KernelError(f"mean: empty extent on axes {axes} of shape {x.shape}")
        n = 1
        for a in axes:
            n *= x.shape[a]
        # same arithmetic as ndarray.mean without its wrapper overhead
        return np.add.reduce(x, axis=axes, keepdims=attrs.get("keepdims", False)) / n, axes

    def bwd(g, d, out, saved, attrs, needs):
        x = d[0]
        axes = saved
        n = int(np.prod([x.shape[a] for a in axes]))
        if not attrs.get("keepdims", False):
            g = np.expand_dims(g, axes)
        return [np.broadcast_to(g / n, x.shape).copy()]

    return fwd, bwd


@_register("sum", 1)
def _sum():
    def fwd(d, attrs):
        (x,) = d
        axes = _norm_axes(attrs.get("axis"), x.ndim)
        return x.sum(axis=axes, keepdims=attrs.get("keepdims", False)), axes

    def bwd(g, d, out, saved, attrs, needs):
        if not attrs.get("keepdims", False):
            g = np.expand_dims(g, saved)
        return [np.broadcast_to(g, d[0].shape).copy()]

    return fwd, bwd


@_register("max", 1)
def _max():
    def fwd(d, attrs):
        (x,) = d
        axis = attrs.get("axis", -1) % x.ndim
        if x.shape[axis] == 0:
            raise KernelError(f"max: empty axis {axis} of shape {x.shape}")
        idx = np.argmax(x, axis=axis)  # first occurrence on ties
        out = np.take_along_axis(x, np.expand_dims(idx, axis), axis=axis)
        if not attrs.get("keepdims", False):
            out = np.squeeze(out, axis=axis)
        return out, (axis, idx)

    def bwd(g, d, out, saved, attrs, needs):
        axis, idx = saved
        full = np.zeros_like(d[0])
        if not attrs.get("keepdims", False):
            g = np.expand_dims(g, axis)
        np.put_along_axis(full, np.expand_dims(idx, axis), g, axis=axis)
        return [full]

    return fwd, bwd


@_register("softmax", 1)
def _softmax():
    def fwd(d, attrs):
        (x,) = d
        axis = attrs.get("axis", -1)
        z = np.exp(x - x.max(axis=axis, keepdims=True))
        return z / z.sum(axis=axis, keepdims=True), None

    def bwd(g, d, out, saved, attrs, needs):
        axis = attrs.get("axis", -1)
        return [out * (g - (g * out).sum(axis=axis, keepdims=True))]

    return fwd, bwd


@_register("sigmoid", 1)
def _sigmoid():
    def fwd(d, attrs):
        return expit(d[0]), None

    def bwd(g, d, out, saved, attrs, needs):
        return [g * out * (1.0 - out)]

    return fwd, bwd


@_register("tanh", 1)
def _tanh():
    def fwd(d, attrs):
        return np.tanh(d[0]), None

    def bwd(g, d, out, saved, attrs, needs):
        return [g * (1.0 - out * out)]

    return fwd, bwd


@_register("swish", 1)
def _swish():
    def fwd(d, attrs):
        s = expit(d[0])
        return d[0] * s, s

    def bwd(g, d, out, saved, attrs, needs):
        s = saved
        return [g * (s + d[0] * s * (1.0 - s))]

    return fwd, bwd


@_register("log", 1)
def _log():
    # optional ``floor``/``ceil`` clamp the argument; clamped entries get zero slope
    def fwd(d, attrs):
        x = d[0]
        floor, ceil = attrs.get("floor"), attrs.get("ceil")
        if floor is not None or ceil is not None:
            x = np.clip(x, floor, ceil)
        if np.any(x <= 0):
            raise KernelError("log: non-positive input without a floor")
        return np.log(x), x

    def bwd(g, d, out, saved, attrs, needs):
        grad = g / saved
        floor, ceil = attrs.get("floor"), attrs.get("ceil")
        if floor is not None:
            grad = np.where(d[0] < floor, 0.0, grad)
        if ceil is not None:
            grad = np.where(d[0] > ceil, 0.0, grad)
        return [grad]

    return fwd, bwd


@_register("exp", 1)
def _exp():
    def fwd(d, attrs):
        return np.exp(d[0]), None

    def bwd(g, d, out, saved, attrs, needs):
        return [g * out]

    return fwd, bwd


def _shifted_windows_2d(xp: np.ndarray, k: int, h: int, w: int):
    for i in range(k):
        for j in range(k):
            yield i, j, xp[..., i:i + h, j:j + w]


@_register("depthwise_conv2d", 2)
def _dwconv2d():
    # x: (..., C, H, W), w: (C, k, k); cross-correlation, stride 1, zero pad k//2
    def fwd(d, attrs):
        x, w = d
        if x.ndim < 3 or w.ndim != 3 or w.shape[1] != w.shape[2] or w.shape[0] != x.shape[-3]:
            raise KernelError(f"depthwise_conv2d: input {x.shape} incompatible with kernel {w.shape}")
        k = w.shape[1]
        if k % 2 == 0:
            raise KernelError(f"depthwise_conv2d: kernel size {k} must be odd")
        p = k // 2
        h, wd = x.shape[-2:]
        xp = _zero_pad(x, (p, p))
        out = np.zeros_like(x)
        for i, j, win in _shifted_windows_2d(xp, k, h, wd):
            out += win * w[:, i, j][:, None, None]
        return out, xp

    def bwd(g, d, out, saved, attrs, needs):
        x, w = d
        xp = saved
        k = w.shape[1]
        p = k // 2
        h, wd = x.shape[-2:]
        gx = gw = None
        if needs[0]:
            gp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    gp[..., i:i + h, j:j + wd] += g * w[:, i, j][:, None, None]
            gx = gp[..., p:p + h, p:p + wd].copy()
        if needs[1]:
            gw = np.zeros_like(w)
            lead = tuple(range(x.ndim - 3))
            for i, j, win in _shifted_windows_2d(xp, k, h, wd):
                gw[:, i, j] = (win * g).sum(axis=lead + (x.ndim - 2, x.ndim - 1))
        return [gx, gw]

    return fwd, bwd


@_register("depthwise_conv1d", 2)
def _dwconv1d():
    # x: (..., L), w: (..., r) broadcast against x.shape[:-1]; zero pad r//2
    def fwd(d, attrs):
        x, w = d
        r = w.shape[-1]
        if r % 2 == 0:
            raise KernelError(f"depthwise_conv1d: kernel width {r} must be odd")
        try:
            np.broadcast_shapes(x.shape[:-1], w.shape[:-1])
        except ValueError:
            raise KernelError(
                f"depthwise_conv1d: kernel {w.shape} does not broadcast over input {x.shape}") from None
        p = r // 2
        n = x.shape[-1]
        xp = _zero_pad(x, (p,))
        out = np.zeros(np.broadcast_shapes(x.shape, w.shape[:-1] + (1,)))
        for i in range(r):
            out = out + xp[..., i:i + n] * w[..., i:i + 1]
        return out, xp

    def bwd(g, d, out, saved, attrs, needs):
        x, w = d
        xp = saved
        r = w.shape[-1]
        p = r // 2
        n = x.shape[-1]
        gx = gw = None
        if needs[0]:
            gp = np.zeros(g.shape[:-1] + (n + 2 * p,))
            for i in range(r):
                gp[..., i:i + n] += g * w[..., i:i + 1]
            gx = _unbroadcast(gp[..., p:p + n], x.shape)
        if needs[1]:
            cols = [_unbroadcast((xp[..., i:i + n] * g).sum(axis=-1, keepdims=True),
                                 w.shape[:-1] + (1,)) for i in range(r)]
            gw = np.concatenate(cols, axis=-1)
        return [gx, gw]

    return fwd, bwd


@_register("conv1x1", 2)
def _conv1x1():
    # x: (..., C_in, P), w: (..., C_out, C_in) -> (..., C_out, P)
    mm_fwd, mm_bwd = _matmul()

    def fwd(d, attrs):
        x, w = d
        if w.shape[-1] != x.shape[-2]:
            raise KernelError(f"conv1x1: weight {w.shape} expects {w.shape[-1]} input channels, "
                              f"input {x.shape} has {x.shape[-2]}")
        return mm_fwd((w, x), attrs)

    def bwd(g, d, out, saved, attrs, needs):
        gw, gx = mm_bwd(g, (d[1], d[0]), out, saved, attrs, (needs[1], needs[0]))
        return [gx, gw]

    return fwd, bwd


@_register("dropout", 1)
def _dropout():
    # inverted dropout; mask drawn from attrs["rng"] (a numpy Generator)
    def fwd(d, attrs):
        (x,) = d
        p = float(attrs.get("p", 0.0))
        if not attrs.get("training", True) or p == 0.0:
            return x.copy(), None
        if not 0.0 <= p < 1.0:
            raise KernelError(f"dropout: probability {p} outside [0, 1)")
        keep = 1.0 - p
        mask = (attrs["rng"].random(x.shape) < keep) / keep
        return x * mask, mask

    def bwd(g, d, out, saved, attrs, needs):
        return [g if saved is None else g * saved]

    return fwd, bwd


# ----------------------------------------------------------------------------


def forward_kernels(kind: str, *inputs, **attrs) -> Tensor:
    """Apply kernel ``kind`` to ``inputs``; record it if any input is taped."""
    try:
        kernel = KERNELS[kind]
    except KeyError:
        raise KernelError(f"unknown kernel kind {kind!r}") from None
    if kernel.arity is not None and len(inputs) != kernel.arity:
        raise KernelError(f"{kind}: expected {kernel.arity} inputs, got {len(inputs)}")
    tensors, tape = [], None
    for x in inputs:
        t = x if isinstance(x, Tensor) else Tensor(x)
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif t.tape is not tape:
                raise KernelError(f"{kind}: inputs belong to different tapes")
        tensors.append(t)
    datas = tuple(t.data for t in tensors)
    out, saved = kernel.forward(datas, attrs)
    if tape is None:
        return Tensor(out)
    return tape._record(kind, tensors, datas, saved, attrs, np.asarray(out, dtype=np.float64))


def backward(loss: Tensor) -> dict[int, np.ndarray]:
    """Gradient of a scalar ``loss`` with respect to every leaf of its tape.

    Returns a mapping ``tape_id -> gradient``; leaves that do not influence
    the loss get zeros of their own shape.
    """
    if loss.size != 1:
        raise KernelError(f"backward: loss must be a single element, got shape {loss.shape}")
    if loss.tape is None:
        raise KernelError("backward: loss is not on a tape")
    tape = loss.tape
    grads: dict[int, np.ndarray] = {loss.tape_id: np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(node.out_id, None)
        if g is None:
            continue
        needs = tuple(i is not None for i in node.inputs)
        in_grads = KERNELS[node.kind].backward(g, node.datas, node.out, node.saved, node.attrs, needs)
        for i, gi in zip(node.inputs, in_grads):
            if i is None or gi is None:
                continue
            grads[i] = grads[i] + gi if i in grads else gi
    result = {tid: grads.get(tid, np.zeros_like(leaf.data)).reshape(leaf.shape)
              for tid, leaf in tape.leaves.items()}
    tape.gradients = result
    return result


def finite_diff_gradient(f: Callable[[np.ndarray], float], theta, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    if not eps > 0:
        raise ValueError(f"finite_diff_gradient: step must be positive, got {eps}")
    theta = np.array(theta, dtype=np.float64)
    flat = theta.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(theta))
        flat[i] = orig - eps
        fm = float(f(theta))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"finite_diff_gradient: non-finite value probing coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad.reshape(theta.shape)


# ----------------------------------------------------------------------------
# convenience wrappers


def matmul(a, b):
    return forward_kernels("matmul", a, b)


def linear(x, w):
    """``x @ w`` over the last axis of ``x``; 1-D inputs are treated as one row."""
    x = as_tensor(x)
    if x.ndim == 1:
        return reshape(matmul(reshape(x, (1, x.shape[0])), w), (as_tensor(w).shape[-1],))
    return matmul(x, w)


def add(a, b):
    return forward_kernels("add", a, b)


def sub(a, b):
    return forward_kernels("sub", a, b)


def mul(a, b):
    return forward_kernels("mul", a, b)


def concat(xs: Sequence, axis: int = 0):
    return forward_kernels("concat", *xs, axis=axis)


def reshape(x, shape):
    return forward_kernels("reshape", x, shape=tuple(shape))


def transpose(x, axes=None):
    return forward_kernels("transpose", x, axes=None if axes is None else tuple(axes))


def slice_(x, index):
    if not isinstance(index, tuple):
        index = (index,)
    advanced = any(isinstance(i, (list, np.ndarray)) for i in index)
    return forward_kernels("slice", x, index=index, advanced=advanced)


def mean(x, axis=None, keepdims: bool = False):
    return forward_kernels("mean", x, axis=axis, keepdims=keepdims)


def sum_(x, axis=None, keepdims: bool = False):
    return forward_kernels("sum", x, axis=axis, keepdims=keepdims)


def max_(x, axis: int = -1, keepdims: bool = False):
    return forward_kernels("max", x, axis=axis, keepdims=keepdims)


def softmax(x, axis: int = -1):
    return forward_kernels("softmax", x, axis=axis)


def sigmoid(x):
    return forward_kernels("sigmoid", x)


def tanh(x):
    return forward_kernels("tanh", x)


def swish(x):
    return forward_kernels("swish", x)


def log(x, floor: float | None = None, ceil: float | None = None):
    return forward_kernels("log", x, floor=floor, ceil=ceil)


def exp(x):
    return forward_kernels("exp", x)


def depthwise_conv2d(x, w):
    return forward_kernels("depthwise_conv2d", x, w)


def depthwise_conv1d(x, w):
    return forward_kernels("depthwise_conv1d", x, w)


def conv1x1(x, w):
    return forward_kernels("conv1x1", x, w)


def dropout(x, p: float, rng: np.random.Generator | None, training: bool = True):
    return forward_kernels("dropout", x, p=p, rng=rng, training=training)
