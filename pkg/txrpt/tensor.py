# Copyright 2026 The TxRPT Developers.  All rights reserved.
# Use of this source code is governed by the Apache License that can be
# found in the LICENSE file.

"""
Dense tensors with reverse-mode automatic differentiation.

Every tensor wraps a C-ordered numpy array, so the flat layout is row-major:
index (i, j, c) of an h x w x channels tensor lives at (i*w + j)*channels + c.
Operations build a fresh node graph on every forward pass; :func:`backward`
walks it once in reverse topological order.

Elementwise operations never broadcast implicitly.  Use :func:`expand` to
repeat a tensor along new or unit axes; its backward rule sums the repeats.
"""

from __future__ import absolute_import, division

import math
import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from txrpt.errors import AxisError, ContractError, DegenerateVectorError, \
    DimensionError, NonFiniteError


PRECISIONS = {
    "standard": np.float32,
    "wide": np.float64,
}

NORM_FLOOR = 1e-12

_settings = {
    "dtype": np.float32,
    "debug": False,
}

# precision() overrides are per thread so parallel forwards cannot interfere
_local = threading.local()


def _lookup(name):
    if name not in PRECISIONS:
        raise ContractError("TxRPT: unknown precision {0!r}, expected one of {1}"
                            .format(name, sorted(PRECISIONS)))
    return PRECISIONS[name]


def set_precision(name):
    """Set the process-wide default dtype for new tensors."""
    _settings["dtype"] = _lookup(name)


def get_dtype():
    return getattr(_local, "dtype", None) or _settings["dtype"]


@contextmanager
def precision(name):
    """Switch the dtype of newly created tensors for the current thread."""
    previous = getattr(_local, "dtype", None)
    _local.dtype = _lookup(name)
    try:
        yield
    finally:
        _local.dtype = previous


def set_debug(flag):
    _settings["debug"] = bool(flag)


def is_debug():
    return _settings["debug"]


@contextmanager
def debug_mode(flag=True):
    """Sweep every op result for NaN/Inf while active."""
    previous = _settings["debug"]
    _settings["debug"] = bool(flag)
    try:
        yield
    finally:
        _settings["debug"] = previous


class Tensor(object):
    """An n-dimensional array of reals with optional gradient accumulation.

    :param values: anything :func:`numpy.array` accepts.
    :param requires_grad: when true, :func:`backward` fills :attr:`grad`.
    :param name: optional label used in diagnostics and checkpoints.
    """

    is_parameter = False

    def __init__(self, values, requires_grad=False, name=None):
        data = np.array(values, dtype=get_dtype())
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("TxRPT: non-finite values in tensor {0}".format(name or "<unnamed>"))
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self.op = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def values(self):
        return self.data.reshape(-1).copy()

    def numpy(self):
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise ContractError("TxRPT: item() on a tensor of shape {0}".format(self.shape))
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return constant(self.data)

    def __repr__(self):
        label = " name={0!r}".format(self.name) if self.name else ""
        return "Tensor(shape={0}{1}, requires_grad={2})".format(self.shape, label, self.requires_grad)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = shape[0]
        return reshape(self, shape)


class Parameter(Tensor):
    """A tensor owned by a layer; frozen parameters never receive gradients."""

    is_parameter = True

    def __init__(self, values, trainable=True, name=None):
        super(Parameter, self).__init__(values, requires_grad=trainable, name=name)

    @property
    def trainable(self):
        return self.requires_grad


def constant(values, name=None):
    return Tensor(values, requires_grad=False, name=name)


def zeros(shape, requires_grad=False, name=None):
    return Tensor(np.zeros(shape), requires_grad=requires_grad, name=name)


def _result(data, parents, backward, op):
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data)
    out.grad = None
    out.name = None
    out.op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    if _settings["debug"] and not np.all(np.isfinite(data)):
        raise NonFiniteError("TxRPT: non-finite values produced by {0}".format(op))
    return out


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise DimensionError("TxRPT: {0} needs equal shapes, got {1} and {2}".format(op, a.shape, b.shape))


def _is_scalar(value):
    return isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool)


# Elementwise arithmetic; python scalars act as constants and keep the tensor dtype

def add(a, b):
    if _is_scalar(b):
        b = float(b)
        return _result(a.data + b, (a,), lambda g: (g,), "add")
    _same_shape(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b):
    if _is_scalar(b):
        b = float(b)
        return _result(a.data - b, (a,), lambda g: (g,), "sub")
    _same_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    if _is_scalar(b):
        b = float(b)
        return _result(a.data * b, (a,), lambda g: (g * b,), "mul")
    _same_shape(a, b, "mul")
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def div(a, b):
    if _is_scalar(b):
        b = float(b)
        return _result(a.data / b, (a,), lambda g: (g / b,), "div")
    _same_shape(a, b, "div")
    out = a.data / b.data
    return _result(out, (a, b), lambda g: (g / b.data, -g * out / b.data), "div")


def neg(x):
    return _result(-x.data, (x,), lambda g: (-g,), "neg")


def power(x, exponent):
    out = x.data ** exponent
    return _result(out, (x,), lambda g: (g * exponent * x.data ** (exponent - 1),), "power")


def sqrt(x):
    out = np.sqrt(x.data)
    return _result(out, (x,), lambda g: (g * 0.5 / out,), "sqrt")


def exp(x):
    out = np.exp(x.data)
    return _result(out, (x,), lambda g: (g * out,), "exp")


def log(x):
    return _result(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def absolute(x):
    return _result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "absolute")


def clip(x, low, high):
    out = np.clip(x.data, low, high)
    inside = (x.data >= low) & (x.data <= high)
    return _result(out, (x,), lambda g: (g * inside,), "clip")


def tanh(x):
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1 - out * out),), "tanh")


def _stable_sigmoid(values):
    e = np.exp(-np.abs(values))
    return np.where(values >= 0, 1 / (1 + e), e / (1 + e))


def sigmoid(x):
    out = _stable_sigmoid(x.data)
    return _result(out, (x,), lambda g: (g * out * (1 - out),), "sigmoid")


_GELU_C = math.sqrt(2 / math.pi)


def gelu(x):
    """Tanh approximation of the Gaussian error linear unit."""
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)
    out = 0.5 * v * (1 + t)

    def backward(g):
        d_inner = _GELU_C * (1 + 3 * 0.044715 * v ** 2)
        return (g * (0.5 * (1 + t) + 0.5 * v * (1 - t * t) * d_inner),)

    return _result(out, (x,), backward, "gelu")


def softmax(x, axis=-1):
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (x,), backward, "softmax")


# Shape manipulation

def matmul(a, b):
    """Matrix product of 2-D tensors, or of stacks of matrices with equal leading extents."""
    if a.ndim < 2 or a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise DimensionError("TxRPT: matmul cannot combine shapes {0} and {1}".format(a.shape, b.shape))

    def backward(g):
        return (np.matmul(g, np.swapaxes(b.data, -1, -2)),
                np.matmul(np.swapaxes(a.data, -1, -2), g))

    return _result(np.matmul(a.data, b.data), (a, b), backward, "matmul")


def transpose(x):
    """Swap the last two axes."""
    if x.ndim < 2:
        raise DimensionError("TxRPT: transpose needs at least 2 axes, got shape {0}".format(x.shape))
    return _result(np.swapaxes(x.data, -1, -2).copy(), (x,),
                   lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def permute(x, axes):
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise AxisError("TxRPT: {0} is not a permutation of the axes of shape {1}".format(axes, x.shape))
    inverse = np.argsort(axes)
    return _result(np.ascontiguousarray(np.transpose(x.data, axes)), (x,),
                   lambda g: (np.transpose(g, inverse),), "permute")


def reshape(x, shape):
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.size or any(s < 0 for s in shape):
        raise DimensionError("TxRPT: cannot reshape {0} into {1}".format(x.shape, shape))
    source = x.shape
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(source),), "reshape")


def take(x, index):
    """Basic slicing (integers, slices, Ellipsis); the result is a copy."""
    if not isinstance(index, tuple):
        index = (index,)
    for part in index:
        if not (part is Ellipsis or isinstance(part, (slice, int, np.integer))):
            raise ContractError("TxRPT: only basic slicing is supported, got {0!r}".format(part))
    try:
        out = x.data[index].copy()
    except IndexError as e:
        raise DimensionError("TxRPT: bad index {0!r} for shape {1}: {2}".format(index, x.shape, e))

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] += g
        return (full,)

    return _result(out, (x,), backward, "take")


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise DimensionError("TxRPT: concat of an empty list")
    ndim = tensors[0].ndim
    axis = axis + ndim if axis < 0 else axis
    for t in tensors:
        if t.ndim != ndim or t.shape[:axis] + t.shape[axis + 1:] != tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]:
            raise DimensionError("TxRPT: concat along axis {0} of mismatched shapes {1}"
                                 .format(axis, [s.shape for s in tensors]))
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(out, tensors, backward, "concat")


def stack(tensors):
    """Stack equally shaped tensors along a new leading axis."""
    return concat([reshape(t, (1,) + t.shape) for t in tensors], axis=0)


def unstack(x):
    return [take(x, i) for i in range(x.shape[0])]


def expand(x, shape):
    """Repeat ``x`` along new leading axes and along unit axes to reach ``shape``."""
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise DimensionError("TxRPT: cannot expand {0} to {1}".format(x.shape, shape))
    lead = len(shape) - x.ndim
    unit = tuple(i + lead for i, s in enumerate(x.shape) if s == 1 and shape[i + lead] != 1)

    def backward(g):
        g = g.sum(axis=tuple(range(lead))) if lead else g
        if unit:
            g = g.sum(axis=tuple(u - lead for u in unit), keepdims=True)
        return (g.reshape(x.shape),)

    return _result(out, (x,), backward, "expand")


# Reductions

def _normalize_axes(x, axes):
    if axes is None:
        return tuple(range(x.ndim))
    if isinstance(axes, int):
        axes = (axes,)
    normalized = []
    for axis in axes:
        if not -x.ndim <= axis < x.ndim:
            raise AxisError("TxRPT: axis {0} out of range for shape {1}".format(axis, x.shape))
        normalized.append(axis % x.ndim)
    if len(set(normalized)) != len(normalized):
        raise AxisError("TxRPT: repeated axes {0}".format(tuple(axes)))
    return tuple(sorted(normalized))


def sum(x, axes=None):
    axes = _normalize_axes(x, axes)
    source = x.shape

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axes), source).copy(),)

    return _result(np.asarray(np.sum(x.data, axis=axes)), (x,), backward, "sum")


def mean_over_axes(x, axes):
    """Arithmetic mean along ``axes``; the reduced axes are removed."""
    axes = _normalize_axes(x, axes)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    source = x.shape

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axes), source) / count,)

    return _result(np.asarray(np.mean(x.data, axis=axes)), (x,), backward, "mean")


# Composite operations

def _check_norm(norm, op):
    if np.any(norm <= NORM_FLOOR):
        raise DegenerateVectorError("TxRPT: zero-norm vector in {0}".format(op))


def cosine_similarity(a, b):
    if a.ndim != 1 or a.shape != b.shape:
        raise DimensionError("TxRPT: cosine_similarity needs equal-length vectors, got {0} and {1}"
                             .format(a.shape, b.shape))
    _check_norm(np.linalg.norm(a.data), "cosine_similarity")
    _check_norm(np.linalg.norm(b.data), "cosine_similarity")
    dot = sum(a * b)
    norms = sqrt(sum(a * a)) * sqrt(sum(b * b))
    return dot / norms


def l2_normalize(x):
    """Scale every vector along the last axis to unit length."""
    _check_norm(np.linalg.norm(x.data, axis=-1), "l2_normalize")
    norms = sqrt(sum(x * x, axes=-1))
    norms = reshape(norms, norms.shape + (1,))
    return x / expand(norms, x.shape)


# Image operations

def _interpolation(n_in, n_out):
    """Source indices and fractions for half-pixel-center resampling."""
    out = np.arange(n_out)
    src = (out + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0, n_in - 1)
    low = np.floor(src).astype(int)
    high = np.minimum(low + 1, n_in - 1)
    frac = src - low
    weights = np.zeros((n_out, n_in))
    np.add.at(weights, (out, low), 1 - frac)
    np.add.at(weights, (out, high), frac)
    return low, high, frac, weights


def bilinear_upsample(x, out_h, out_w):
    """Half-pixel-center bilinear resampling of an h x w x c tensor."""
    if out_h <= 0 or out_w <= 0:
        raise DimensionError("TxRPT: upsample target extents must be positive, got {0}x{1}".format(out_h, out_w))
    if x.ndim != 3 or out_h < x.shape[0] or out_w < x.shape[1]:
        raise DimensionError("TxRPT: cannot upsample {0} to {1}x{2}".format(x.shape, out_h, out_w))
    h, w = x.shape[:2]
    r_low, r_high, r_frac, rows = _interpolation(h, out_h)
    c_low, c_high, c_frac, cols = _interpolation(w, out_w)
    dtype = x.data.dtype

    # x0 + f*(x1 - x0) keeps constant fields exact; the clip absorbs rounding past the bounds
    v = x.data
    r_frac = r_frac.astype(dtype)[:, None, None]
    c_frac = c_frac.astype(dtype)[None, :, None]
    tall = v[r_low] + r_frac * (v[r_high] - v[r_low])
    out = tall[:, c_low] + c_frac * (tall[:, c_high] - tall[:, c_low])
    out = np.clip(out, v.min(), v.max())

    def backward(g):
        return (np.einsum("ia,jb,ijc->abc", rows, cols, g, optimize=True).astype(dtype),)

    return _result(out, (x,), backward, "bilinear_upsample")


def conv2d(x, weight, bias, stride=1, padding=1):
    """2-D cross-correlation of an H x W x Cin tensor with a kh x kw x Cin x Cout kernel."""
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[2] != x.shape[2] or bias.shape != (weight.shape[3],):
        raise DimensionError("TxRPT: conv2d cannot combine input {0}, kernel {1}, bias {2}"
                             .format(x.shape, weight.shape, bias.shape))
    height, width, channels = x.shape
    kh, kw, _, out_channels = weight.shape
    padded = np.pad(x.data, ((padding, padding), (padding, padding), (0, 0)))
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    if out_h <= 0 or out_w <= 0:
        raise DimensionError("TxRPT: conv2d kernel {0} larger than padded input {1}".format(weight.shape, x.shape))

    windows = sliding_window_view(padded, (kh, kw), axis=(0, 1))[::stride, ::stride][:out_h, :out_w]
    cols = windows.transpose(0, 1, 3, 4, 2).reshape(out_h * out_w, kh * kw * channels)
    kernel = weight.data.reshape(kh * kw * channels, out_channels)
    out = (cols @ kernel + bias.data).reshape(out_h, out_w, out_channels)

    def backward(g):
        flat = g.reshape(out_h * out_w, out_channels)
        grad_weight = (cols.T @ flat).reshape(weight.shape)
        grad_bias = flat.sum(axis=0)
        grad_cols = (flat @ kernel.T).reshape(out_h, out_w, kh, kw, channels)
        grad_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                grad_padded[i:i + stride * out_h:stride, j:j + stride * out_w:stride] += grad_cols[:, :, i, j]
        grad_x = grad_padded[padding:padding + height, padding:padding + width]
        return grad_x, grad_weight, grad_bias

    return _result(out, (x, weight, bias), backward, "conv2d")


# Differentiation

class Graph(object):
    """Operations reachable from a root, inputs before the ops that consume them."""

    def __init__(self, operations):
        self.operations = operations

    def __len__(self):
        return len(self.operations)

    @classmethod
    def trace(cls, root):
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
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)


def backward(loss):
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable tensor that requires it."""
    if loss.size != 1:
        raise ContractError("TxRPT: backward needs a scalar loss, got shape {0}".format(loss.shape))
    if not loss.requires_grad:
        raise ContractError("TxRPT: loss is not connected to any tensor that requires grad")

    graph = Graph.trace(loss)
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.operations):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = parent_grad if key not in pending else pending[key] + parent_grad
    return graph


def grad_check(f, inputs, eps=1e-4, floor=1e-4, max_coords=None, rng=None):
    """Worst relative error between analytic and central-difference gradients.

    :param f: deterministic callable taking ``inputs`` and returning a scalar tensor.
    :param inputs: tensors to perturb in place; they must require grad.
    :param floor: lower bound on the denominator of the relative error.
    :param max_coords: check at most this many coordinates per input.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ContractError("TxRPT: grad_check step {0} outside [1e-6, 1e-3]".format(eps))
    inputs = list(inputs)
    for t in inputs:
        t.zero_grad()
    backward(f(*inputs))
    analytic = [t.grad.reshape(-1).copy() if t.grad is not None else np.zeros(t.size) for t in inputs]
    rng = rng if rng is not None else np.random.default_rng(0)

    worst = 0.0
    for tensor, grads in zip(inputs, analytic):
        flat = tensor.data.reshape(-1)
        if max_coords is None or max_coords >= flat.size:
            coords = range(flat.size)
        else:
            coords = sorted(rng.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            plus = f(*inputs).item()
            flat[i] = original - eps
            minus = f(*inputs).item()
            flat[i] = original
            numeric = (plus - minus) / (2 * eps)
            error = abs(grads[i] - numeric) / max(abs(grads[i]), abs(numeric), floor)
            worst = max(worst, error)
    return worst
