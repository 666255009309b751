"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable computation in this package flows through the ops
defined here. Design points:

* compute dtype is float32 by default; the gradient-check harness runs the
  same graphs at float64 (pass ``dtype=np.float64`` when building tensors),
* data is row-major and ops never mutate their inputs; a backward pass only
  writes ``.grad`` fields,
* executed ops are recorded in creation order, so replaying that record in
  reverse is a reverse topological order over the graph and visits each op
  exactly once (see :class:`Tape`),
* results are deterministic for a fixed seed: no nondeterministic reduction
  orders are used anywhere.
"""

import itertools
from contextlib import contextmanager

import numpy as np

from . import kernels

DEFAULT_DTYPE = np.float32

_seq_counter = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable op recording inside the block (frozen-model forward passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


class Node:
    """One recorded primitive op: its inputs and the gradient closure."""

    __slots__ = ("op", "inputs", "backward_fn", "out_seq")

    def __init__(self, op, inputs, backward_fn, out_seq):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.out_seq = out_seq


class Tensor:
    """Dense real array participating in the gradient tape.

    ``data`` is always a NumPy array of floating dtype; ``grad`` is either
    None or an array of identical shape and dtype.
    """

    __slots__ = ("data", "grad", "requires_grad", "_node", "_seq")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            raise TypeError("wrap raw arrays, not Tensors")
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._node = None
        self._seq = next(_seq_counter)

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
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        Tape.from_root(self).backward(self, grad)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # operator sugar; scalars are promoted to constant tensors
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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


class Tape:
    """Ordered record of the ops that produced a tensor.

    Ops are stored in execution order; an op's output always carries a
    higher sequence number than its inputs, so iterating the record in
    reverse is a reverse topological order and hits each op exactly once.
    """

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root):
        seen = set()
        nodes = []
        stack = [root]
        while stack:
            t = stack.pop()
            node = t._node
            if node is None or id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append((node.out_seq, node, t))
            stack.extend(node.inputs)
        nodes.sort(key=lambda item: item[0], reverse=True)
        return cls(nodes)

    def backward(self, root, grad=None):
        if grad is None:
            if root.size != 1:
                raise ValueError(
                    f"backward() without an explicit gradient requires a scalar, "
                    f"got shape {root.shape}"
                )
            grad = np.ones_like(root.data)
        else:
            grad = np.asarray(grad, dtype=root.dtype)
            if grad.shape != root.data.shape:
                raise ValueError(
                    f"seed gradient shape {grad.shape} != output shape {root.shape}"
                )
        flowing = {id(root): grad}
        self._sink(root, grad)
        for _, node, out in self.nodes:
            g_out = flowing.pop(id(out), None)
            if g_out is None:
                continue
            grads_in = node.backward_fn(g_out)
            for inp, g in zip(node.inputs, grads_in):
                if g is None:
                    continue
                if g.shape != inp.data.shape:
                    raise RuntimeError(
                        f"{node.op}: gradient shape {g.shape} != input shape "
                        f"{inp.data.shape}"
                    )
                key = id(inp)
                if key in flowing:
                    flowing[key] = flowing[key] + g
                else:
                    flowing[key] = g
                self._sink(inp, g)

    @staticmethod
    def _sink(tensor, g):
        if tensor.requires_grad and tensor._node is None:
            if tensor.grad is None:
                tensor.grad = g.copy()
            else:
                tensor.grad = tensor.grad + g


def as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype))


def _record(op, inputs, out_data, backward_fn):
    out = Tensor(out_data)
    if _grad_enabled and any(
        t.requires_grad or t._node is not None for t in inputs
    ):
        out._node = Node(op, tuple(inputs), backward_fn, out._seq)
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original input shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _record("add", (a, b), out, backward)


def sub(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _record("sub", (a, b), out, backward)


def mul(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a)
    out = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _record("mul", (a, b), out, backward)


def div(a, b):
    a, b = as_tensor(a, b if isinstance(b, Tensor) else None), as_tensor(b, a)
    out = a.data / b.data

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _record("div", (a, b), out, backward)


def neg(a):
    a = as_tensor(a)

    def backward(g):
        return (-g,)

    return _record("neg", (a,), -a.data, backward)


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    out = np.where(a.data >= 0, a.data, a.data * a.dtype.type(slope))

    def backward(g):
        return (np.where(a.data >= 0, g, g * a.dtype.type(slope)),)

    return _record("leaky_relu", (a,), out, backward)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _record("tanh", (a,), out, backward)


# ---------------------------------------------------------------------------
# shape ops


def reshape(a, shape):
    a = as_tensor(a)
    if isinstance(shape, int):
        shape = (shape,)
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.data.shape),)

    return _record("reshape", (a,), out, backward)


def transpose(a, axes):
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))

    def backward(g):
        return (np.ascontiguousarray(g.transpose(inverse)),)

    return _record("transpose", (a,), out, backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _record("concat", tuple(tensors), out, backward)


def resize_nearest(a, scale):
    """Nearest-neighbor upsampling of the trailing two axes by an integer factor."""
    a = as_tensor(a)
    if not isinstance(scale, int) or scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale!r}")
    if a.ndim < 2:
        raise ValueError(f"resize_nearest needs >= 2 dims, got shape {a.shape}")
    out = a.data.repeat(scale, axis=-2).repeat(scale, axis=-1)

    def backward(g):
        lead = g.shape[:-2]
        h, w = a.data.shape[-2:]
        g = g.reshape(lead + (h, scale, w, scale))
        return (g.sum(axis=(-3, -1)),)

    return _record("resize_nearest", (a,), out, backward)


# ---------------------------------------------------------------------------
# reductions and distances


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=True),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=True),)

    return _record("sum", (a,), out, backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in np.atleast_1d(axis)]
    )

    def backward(g):
        g = g / a.dtype.type(count)
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=True),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=True),)

    return _record("mean", (a,), out, backward)


def abs_(a):
    a = as_tensor(a)
    out = np.abs(a.data)

    def backward(g):
        return (g * np.sign(a.data),)

    return _record("abs", (a,), out, backward)


def mse(a, b):
    """Mean squared error over all elements."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mse: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    out = np.mean(diff * diff)
    scale = 2.0 / a.data.size

    def backward(g):
        gd = (g * scale) * diff
        return gd.astype(a.dtype, copy=False), (-gd).astype(b.dtype, copy=False)

    return _record("mse", (a, b), out, backward)


def cosine_similarity(a, b, eps=1e-8):
    """Cosine of the angle between two flattened vectors, in [-1, 1].

    Raises on (near-)zero-norm inputs: the direction is undefined there.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.size != b.size:
        raise ValueError(f"cosine: size mismatch {a.shape} vs {b.shape}")
    av = a.data.reshape(-1)
    bv = b.data.reshape(-1)
    na = np.sqrt(np.dot(av, av))
    nb = np.sqrt(np.dot(bv, bv))
    if na < eps or nb < eps:
        raise ValueError(
            f"cosine undefined for zero-norm vector (norms {na:.3e}, {nb:.3e})"
        )
    cos = np.dot(av, bv) / (na * nb)

    def backward(g):
        ga = (bv / (na * nb) - av * (cos / (na * na))) * g
        gb = (av / (na * nb) - bv * (cos / (nb * nb))) * g
        return (
            ga.reshape(a.data.shape).astype(a.dtype, copy=False),
            gb.reshape(b.data.shape).astype(b.dtype, copy=False),
        )

    return _record("cosine", (a, b), np.asarray(cos, dtype=a.dtype), backward)


def l2_normalize(a, axis=-1, min_norm=1e-8):
    """Scale rows to unit Euclidean norm; errors on degenerate rows."""
    a = as_tensor(a)
    norms = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))
    if np.any(norms < min_norm):
        raise ValueError(
            f"cannot normalize: row norm below {min_norm:g} (min {norms.min():.3e})"
        )
    out = a.data / norms

    def backward(g):
        dot = np.sum(g * out, axis=axis, keepdims=True)
        return ((g - out * dot) / norms,)

    return _record("l2_normalize", (a,), out, backward)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(
            f"matmul expects >=2-D operands, got {a.shape} @ {b.shape}"
        )
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _record("matmul", (a, b), out, backward)


def linear(x, w, b=None):
    """x @ w + b with a 2-D weight; convenience composition."""
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


def conv2d(x, w, b=None, stride=1, padding=0):
    """2-D cross-correlation in NCHW layout.

    ``x``: (N, Cin, H, W), ``w``: (Cout, Cin, kh, kw), ``b``: (Cout,) or None.
    Differentiable w.r.t. all three. The im2col/col2im data movement runs on
    the selected kernel backend; the contraction is a single BLAS matmul.
    """
    x, w = as_tensor(x), as_tensor(w)
    b = as_tensor(b) if b is not None else None
    sh, sw = (stride, stride) if isinstance(stride, int) else stride
    ph, pw = (padding, padding) if isinstance(padding, int) else padding
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(
            f"conv2d expects 4-D input and weight, got {x.shape} and {w.shape}"
        )
    n, cin, h, wid = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(
            f"conv2d channel mismatch: input has {cin} channels "
            f"(shape {x.shape}), weight expects {cin_w} (shape {w.shape})"
        )
    if b is not None and b.shape != (cout,):
        raise ValueError(f"conv2d bias shape {b.shape} != ({cout},)")
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (wid + 2 * pw - kw) // sw + 1
    if oh < 1 or ow < 1 or kh > h + 2 * ph or kw > wid + 2 * pw:
        raise ValueError(
            f"conv2d kernel {kh}x{kw} does not fit padded input "
            f"{h + 2 * ph}x{wid + 2 * pw} (input {x.shape}, padding {(ph, pw)})"
        )

    cols = kernels.im2col(x.data, kh, kw, sh, sw, ph, pw, oh, ow)
    w2d = w.data.reshape(cout, cin * kh * kw)
    out2d = w2d @ cols
    out = np.ascontiguousarray(
        out2d.reshape(cout, n, oh, ow).transpose(1, 0, 2, 3)
    )
    if b is not None:
        out += b.data.reshape(1, cout, 1, 1)

    def backward(g):
        g2d = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(
            cout, n * oh * ow
        )
        gw = (g2d @ cols.T).reshape(w.data.shape)
        gcols = w2d.T @ g2d
        gx = kernels.col2im(gcols, n, cin, h, wid, kh, kw, sh, sw, ph, pw, oh, ow)
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    inputs = (x, w, b) if b is not None else (x, w)
    return _record("conv2d", inputs, out, backward)


# ---------------------------------------------------------------------------
# attention / classification primitives


def masked_softmax(logits, valid, axis=-1):
    """Softmax over the last axis restricted to positions where valid == 1.

    ``valid`` is a constant 0/1 array broadcastable to ``logits``. Invalid
    positions get weight exactly 0; rows with no valid position at all
    produce an all-zero row (and a zero gradient) instead of NaN.
    """
    logits = as_tensor(logits)
    v = np.broadcast_to(np.asarray(valid, dtype=logits.dtype), logits.shape)
    if axis != -1:
        raise ValueError("masked_softmax only supports the last axis")
    neg = np.finfo(logits.dtype).min
    shifted = np.where(v > 0, logits.data, neg)
    m = shifted.max(axis=-1, keepdims=True)
    e = np.exp(shifted - m) * v
    denom = e.sum(axis=-1, keepdims=True)
    safe = np.where(denom > 0, denom, 1.0)
    probs = (e / safe).astype(logits.dtype)

    def backward(g):
        dot = np.sum(g * probs, axis=-1, keepdims=True)
        return (probs * (g - dot),)

    return _record("masked_softmax", (logits,), probs, backward)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer labels under softmax logits."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy expects (N, K) logits, got {logits.shape}")
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} != ({n},)")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    logsumexp = m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))
    nll = logsumexp[:, 0] - z[np.arange(n), labels]
    out = nll.mean()
    probs = np.exp(z - logsumexp)

    def backward(g):
        gz = probs.copy()
        gz[np.arange(n), labels] -= 1.0
        return ((g / n) * gz,)

    return _record("cross_entropy", (logits,), np.asarray(out, z.dtype), backward)
