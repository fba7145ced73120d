"""Minimal reverse-mode differentiation over numpy arrays.

Only the operations the three networks and their losses need are provided.
Activations are ``(C, H, W)`` or batched ``(N, C, H, W)``; conv kernels are
``(O, C, 3, 3)``. Each op records its parents and a closure that maps the
output gradient to parent gradients; :meth:`Tensor.backward` walks the
recorded graph in reverse topological order.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgument, ShapeError
from .image import bilinear_matrix

_DTYPES = {32: np.float32, 64: np.float64}
_state = {"dtype": np.float64, "grad": True}


def get_default_dtype():
    return _state["dtype"]


@contextlib.contextmanager
def precision(bits: int):
    """Create new tensors at 32- or 64-bit precision inside the block."""
    if bits not in _DTYPES:
        raise InvalidArgument(f"precision must be 32 or 64, got {bits}")
    old = _state["dtype"]
    _state["dtype"] = _DTYPES[bits]
    try:
        yield
    finally:
        _state["dtype"] = old


@contextlib.contextmanager
def no_grad():
    """Skip graph recording, for inference."""
    old = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = old


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.ascontiguousarray(data, dtype=dtype or _state["dtype"])
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every tracked leaf."""
        if grad is None:
            if self.data.size != 1:
                raise InvalidArgument(f"backward needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __getitem__(self, index):
        return getitem(self, index)


def _topo_order(root: Tensor) -> list[Tensor]:
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
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def make_node(data, parents, backward, op: str = "custom") -> Tensor:
    """Wrap an op result; ``backward(g)`` returns one gradient per parent."""
    out = Tensor(data, dtype=np.asarray(data).dtype)
    if _state["grad"] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out.op = op
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}") from exc


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return make_node(a.data + b.data, (a, b),
                     lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return make_node(a.data - b.data, (a, b),
                     lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return scalar_mul(a, b)
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return make_node(a.data * b.data, (a, b),
                     lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                     "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    out = a.data / b.data

    def backward(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return make_node(out, (a, b), backward, "div")


def scalar_mul(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return make_node(a.data * a.data.dtype.type(s), (a,), lambda g: (g * s,), "scalar_mul")


def add_scalar(a: Tensor, s: float) -> Tensor:
    return make_node(a.data + a.data.dtype.type(s), (a,), lambda g: (g,), "add_scalar")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return make_node(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def clamp01(a: Tensor) -> Tensor:
    inside = (a.data > 0.0) & (a.data < 1.0)
    return make_node(np.clip(a.data, 0.0, 1.0), (a,), lambda g: (g * inside,), "clamp01")


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return make_node(np.abs(a.data), (a,), lambda g: (g * sign,), "abs")


def square(a: Tensor) -> Tensor:
    return make_node(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return make_node(out, (a,), lambda g: (0.5 * g / out,), "sqrt")


# ---------------------------------------------------------------- reductions

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_node(np.asarray(out), (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if a.data.size == 0:
        raise InvalidArgument("mean of empty tensor")
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scalar_mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------- structure

def getitem(a: Tensor, index) -> Tensor:
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return make_node(np.ascontiguousarray(out), (a,), backward, "getitem")


def concat_channels(parts) -> Tensor:
    """Stack along the channel axis (``-3``) in argument order."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat of zero tensors")
    ref = parts[0].shape
    for p in parts:
        if p.ndim != len(ref) or p.ndim < 3 or p.shape[:-3] != ref[:-3] or p.shape[-2:] != ref[-2:]:
            raise ShapeError(f"cannot concat {p.shape} with {ref}")
    if len(parts) == 1:
        return parts[0]
    bounds = np.cumsum([0] + [p.shape[-3] for p in parts])
    out = np.concatenate([p.data for p in parts], axis=-3)

    def backward(g):
        return tuple(np.ascontiguousarray(g[..., lo:hi, :, :]) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return make_node(out, parts, backward, "concat")


def gather_spatial(a: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """``out[..., i, j] = a[..., rows[i], cols[j]]``; indices may repeat."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    out = a.data[..., rows[:, None], cols[None, :]]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (Ellipsis, rows[:, None], cols[None, :]), g)
        return (full,)

    return make_node(np.ascontiguousarray(out), (a,), backward, "gather")


def pad_reflect_to_multiple(a: Tensor, multiple: int) -> Tensor:
    """Reflect-pad the bottom/right edges up to the next multiple of ``multiple``."""
    h, w = a.shape[-2:]
    ph, pw = -h % multiple, -w % multiple
    if ph == 0 and pw == 0:
        return a
    return gather_spatial(a, _reflect_index(h, h + ph), _reflect_index(w, w + pw))


def _reflect_index(n: int, total: int) -> np.ndarray:
    if n == 1:
        return np.zeros(total, dtype=np.intp)
    period = 2 * (n - 1)
    idx = np.arange(total) % period
    return np.where(idx < n, idx, period - idx)


def avg_pool2(a: Tensor) -> Tensor:
    *lead, h, w = a.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    out = a.data.reshape(*lead, h // 2, 2, w // 2, 2).mean(axis=(-3, -1))

    def backward(g):
        g4 = np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1)
        return (g4 * 0.25,)

    return make_node(out, (a,), backward, "avg_pool2")


def upsample_nearest2(a: Tensor) -> Tensor:
    *lead, h, w = a.shape
    out = np.repeat(np.repeat(a.data, 2, axis=-2), 2, axis=-1)

    def backward(g):
        return (g.reshape(*lead, h, 2, w, 2).sum(axis=(-3, -1)),)

    return make_node(out, (a,), backward, "upsample2")


def resize_bilinear(a: Tensor, out_h: int, out_w: int) -> Tensor:
    """Half-pixel-centred bilinear resize of the last two axes (unclamped)."""
    ah = bilinear_matrix(a.shape[-2], out_h).astype(a.dtype)
    aw = bilinear_matrix(a.shape[-1], out_w).astype(a.dtype)
    out = ah @ a.data @ aw.T
    return make_node(out, (a,), lambda g: (ah.T @ g @ aw,), "resize")


# ---------------------------------------------------------------- convolution

def conv2d_3x3(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Stride-1, zero-padded 3x3 convolution keeping spatial size.

    Accepts ``(C, H, W)`` or ``(N, C, H, W)`` input.
    """
    unbatched = x.ndim == 3
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv input must be 3-D or 4-D, got {x.shape}")
    o, c = weight.shape[0], x.shape[-3]
    if weight.shape != (o, c, 3, 3) or bias.shape != (o,):
        raise ShapeError(f"weight {weight.shape} / bias {bias.shape} do not fit input {x.shape}")
    xd = x.data[None] if unbatched else x.data
    n, _, h, w = xd.shape
    if h < 1 or w < 1:
        raise ShapeError("empty spatial extent")
    cols = kernels.im2col3x3(np.ascontiguousarray(xd)).reshape(n * h * w, c * 9)
    wmat = weight.data.reshape(o, c * 9)
    out = cols @ wmat.T + bias.data
    out = np.ascontiguousarray(out.reshape(n, h * w, o).transpose(0, 2, 1)).reshape(n, o, h, w)
    if unbatched:
        out = out[0]

    def backward(g):
        g_rows = np.ascontiguousarray(g.reshape(n, o, h * w).transpose(0, 2, 1)).reshape(n * h * w, o)
        gw = (cols.T @ g_rows).T.reshape(weight.shape) if weight.requires_grad else None
        gb = g_rows.sum(axis=0) if bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = kernels.col2im3x3((g_rows @ wmat).reshape(n, h * w, c * 9), h, w)
            if unbatched:
                gx = gx[0]
        return gx, gw, gb

    return make_node(out, (x, weight, bias), backward, "conv2d_3x3")


def init_conv(rng: np.random.Generator, c_in: int, c_out: int, dtype=None):
    """Weight/bias uniform in ``[-s, s]`` with ``s = sqrt(1 / (9 * c_in))``."""
    s = np.sqrt(1.0 / (9 * c_in))
    w = rng.uniform(-s, s, size=(c_out, c_in, 3, 3))
    b = rng.uniform(-s, s, size=(c_out,))
    return Tensor(w, requires_grad=True, dtype=dtype), Tensor(b, requires_grad=True, dtype=dtype)


# ---------------------------------------------------------------- fused curve

def curve_iterate(y0: Tensor, alphas: Tensor) -> Tensor:
    """Apply ``y <- y + a_s * y * (1 - y)`` for each stage ``s`` in order.

    ``y0`` is ``(.., 1, H, W)``, ``alphas`` is ``(.., S, H, W)`` with matching
    leading dims. Runs as a single node backed by the compiled kernel.
    """
    if y0.shape[-3] != 1 or y0.shape[:-3] != alphas.shape[:-3] or y0.shape[-2:] != alphas.shape[-2:]:
        raise ShapeError(f"curve_iterate shapes {y0.shape} / {alphas.shape}")
    lead = alphas.shape[:-3]
    s = alphas.shape[-3]
    n = int(np.prod(lead)) if lead else 1
    p = y0.shape[-1] * y0.shape[-2]
    dt = np.result_type(y0.dtype, alphas.dtype)
    y0f = np.ascontiguousarray(y0.data.reshape(n, p), dtype=dt)
    af = np.ascontiguousarray(alphas.data.reshape(n, s, p), dtype=dt)
    ys = kernels.curve_forward(y0f, af)
    out = ys[:, -1].reshape(y0.shape)

    def backward(g):
        gy, ga = kernels.curve_backward(ys, af, np.ascontiguousarray(g.reshape(n, p), dtype=dt))
        return gy.reshape(y0.shape), ga.reshape(alphas.shape)

    return make_node(np.ascontiguousarray(out), (y0, alphas), backward, "curve_iterate")


# ---------------------------------------------------------------- grad check

@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    n_checked: int


def grad_check(f, params, h: float = 1e-4, tol: float = 1e-3, max_per_param: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare backward() against central differences.

    ``f`` takes no arguments and returns a scalar Tensor built from
    ``params``. Relative error is ``|a - n| / (|a| + |n| + 1e-12)``. At most
    ``max_per_param`` entries per parameter are probed, chosen with ``seed``.
    """
    for p in params:
        if p.data.dtype != np.float64:
            raise InvalidArgument("grad_check requires float64 parameters")
        p.zero_grad()
    f().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst, count = 0.0, 0
    with no_grad():
        for p, a in zip(params, analytic):
            flat = p.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_per_param is not None and flat.size > max_per_param:
                idx = rng.choice(flat.size, size=max_per_param, replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                fp = f().item()
                flat[i] = orig - h
                fm = f().item()
                flat[i] = orig
                num = (fp - fm) / (2 * h)
                ana = a.reshape(-1)[i]
                err = abs(ana - num) / (abs(ana) + abs(num) + 1e-12)
                worst = max(worst, err)
                count += 1
    for p in params:
        p.zero_grad()
    return GradCheckReport(max_rel_err=float(worst), passed=bool(worst <= tol), n_checked=count)
