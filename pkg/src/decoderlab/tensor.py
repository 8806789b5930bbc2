"""Dense NCHW tensors with a small reverse-mode tape.

Every differentiable primitive is a plain function: it computes its result
with numpy and, when a :class:`Tape` is active and some input requires a
gradient, appends a closure that maps the output gradient back to the
inputs. :func:`backward` replays those closures in reverse order.

Values are float32 by default. Operations keep the dtype of their inputs,
so gradient checks can run the same code in float64.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_DTYPE = np.float32

_TAPES: list["Tape"] = []
_MAC_COUNTERS: list["MacCounter"] = []


class Tensor:
    """A numpy array plus gradient bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "name", "nonzero_stride", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype == np.float64 else DEFAULT_DTYPE
        self.data = np.ascontiguousarray(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        # (row, col) spacing of the only positions that may be nonzero; set by
        # zero_interleave so convolution MAC counts can skip the zeros.
        self.nonzero_stride = (1, 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def astype(self, dtype) -> "Tensor":
        """Detached copy in another dtype, keeping the requires_grad flag."""
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name, dtype=dtype)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), dtype=self.dtype)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

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

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only defined by constants")
        return mul(self, 1.0 / other)

    def sum(self):
        return sum_all(self)

    def mean(self):
        return mean_all(self)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x), dtype=dtype)


def check_dims(x: Tensor, what: str = "tensor") -> tuple[int, int, int, int]:
    if x.ndim != 4:
        raise ValueError(f"{what} must be 4-D (N, C, H, W), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ValueError(f"{what} has a non-positive dimension: {x.shape}")
    return x.shape


# ---------------------------------------------------------------------------
# tape


@dataclass
class TapeEntry:
    op: str
    inputs: tuple[Tensor | None, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of executed operations.

    Use as a context manager; operations executed inside the block are
    recorded when at least one of their inputs requires a gradient.
    """

    entries: list[TapeEntry] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.entries)

    def ops(self) -> list[str]:
        return [e.op for e in self.entries]


@contextlib.contextmanager
def no_tape() -> Iterator[None]:
    saved = list(_TAPES)
    _TAPES.clear()
    try:
        yield
    finally:
        _TAPES.extend(saved)


def _record(op: str, inputs: Sequence[Tensor | None], out_data: np.ndarray, backward) -> Tensor:
    out = Tensor(out_data, dtype=out_data.dtype)
    if _TAPES and any(t is not None and t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1].entries.append(TapeEntry(op, tuple(inputs), out, backward))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Populate ``.grad`` on every tensor of the tape that requires it.

    Returns a mapping from each leaf tensor (one not produced by a taped op)
    to its gradient. Gradients overwrite, they do not accumulate across calls.
    """
    if loss.size != 1:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
    produced = {id(e.output) for e in tape.entries}
    if id(loss) not in produced:
        raise ValueError("loss was not produced by an operation on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    tensors: dict[int, Tensor] = {}
    for entry in reversed(tape.entries):
        g = grads.pop(id(entry.output), None)
        entry.output.grad = g if g is not None else np.zeros_like(entry.output.data)
        if g is None:
            continue
        in_grads = entry.backward(g)
        for t, gi in zip(entry.inputs, in_grads):
            if t is None or not t.requires_grad or gi is None:
                continue
            tensors[id(t)] = t
            if id(t) in grads:
                grads[id(t)] = grads[id(t)] + gi
            else:
                grads[id(t)] = gi

    leaves: dict[Tensor, np.ndarray] = {}
    for entry in tape.entries:
        for t in entry.inputs:
            if t is None or not t.requires_grad or id(t) in produced:
                continue
            g = grads.get(id(t))
            t.grad = g.astype(t.dtype, copy=False) if g is not None else np.zeros_like(t.data)
            leaves[t] = t.grad
    return leaves


def finite_diff_grad(f: Callable[[], Tensor | float], x: Tensor, eps: float = 1e-3) -> np.ndarray:
    """Central differences of the scalar ``f()`` with respect to ``x`` in place."""
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.data.reshape(-1)
    out = grad.reshape(-1)
    with no_tape():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = _scalar(f())
            flat[i] = orig - eps
            fm = _scalar(f())
            flat[i] = orig
            out[i] = (fp - fm) / (2 * eps)
    return grad


def _scalar(v) -> float:
    return v.item() if isinstance(v, Tensor) else float(v)


# ---------------------------------------------------------------------------
# multiply-accumulate accounting


class MacCounter:
    """Collects convolution MACs, grouped by the innermost active scope."""

    def __init__(self):
        self.totals: dict[str, int] = {}
        self.shapes: dict[str, tuple[int, ...]] = {}
        self._scopes: list[str] = []

    def __enter__(self) -> "MacCounter":
        _MAC_COUNTERS.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _MAC_COUNTERS.remove(self)

    @contextlib.contextmanager
    def scope(self, name: str, input_shape: tuple[int, ...] | None = None):
        self._scopes.append(name)
        self.totals.setdefault(name, 0)
        if input_shape is not None:
            self.shapes.setdefault(name, tuple(input_shape))
        try:
            yield
        finally:
            self._scopes.pop()

    def add(self, n: int) -> None:
        key = self._scopes[-1] if self._scopes else ""
        self.totals[key] = self.totals.get(key, 0) + int(n)

    @property
    def total(self) -> int:
        return sum(self.totals.values())


@contextlib.contextmanager
def mac_scope(name: str, input_shape=None):
    """Attribute MACs to ``name`` on every active counter (no-op otherwise)."""
    with contextlib.ExitStack() as stack:
        for counter in _MAC_COUNTERS:
            stack.enter_context(counter.scope(name, input_shape))
        yield


def _count_macs(n: int) -> None:
    for counter in _MAC_COUNTERS:
        counter.add(n)


# ---------------------------------------------------------------------------
# elementwise and reductions


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _operand(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x), dtype=dtype)


def add(a, b) -> Tensor:
    a = _operand(a, b if isinstance(b, Tensor) else None)
    b = _operand(b, a)
    sa, sb = a.shape, b.shape
    return _record("add", (a, b), a.data + b.data,
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a = _operand(a, b if isinstance(b, Tensor) else None)
    b = _operand(b, a)
    sa, sb = a.shape, b.shape
    return _record("sub", (a, b), a.data - b.data,
                   lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a = _operand(a, b if isinstance(b, Tensor) else None)
    b = _operand(b, a)
    ad, bd = a.data, b.data
    out = (ad * bd).astype(np.result_type(ad, bd), copy=False)
    return _record("mul", (a, b), out,
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _record("relu", (x,), np.where(mask, x.data, 0).astype(x.dtype), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _record("tanh", (x,), y, lambda g: (g * (1 - y * y),))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _record("sum", (x,), np.asarray(x.data.sum(), dtype=x.dtype),
                   lambda g: (np.broadcast_to(g, shape).astype(g.dtype),))


def mean_all(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return _record("mean", (x,), np.asarray(x.data.mean(), dtype=x.dtype),
                   lambda g: (np.broadcast_to(g / n, shape).astype(g.dtype),))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = x.shape
    return _record("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(orig),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product."""
    a = _operand(a, b)
    b = _operand(b, a)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _record("matmul", (a, b), ad @ bd, lambda g: (g @ bd.T, ad.T @ g))


def transpose2d(x: Tensor) -> Tensor:
    return _record("transpose", (x,), np.ascontiguousarray(x.data.T), lambda g: (g.T,))


# ---------------------------------------------------------------------------
# channel plumbing


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    na, ca, ha, wa = check_dims(a, "first input")
    nb, cb, hb, wb = check_dims(b, "second input")
    if (na, ha, wa) != (nb, hb, wb):
        raise ValueError(f"concat needs matching N, H, W; got {a.shape} and {b.shape}")
    out = np.concatenate([a.data, b.data], axis=1)
    return _record("concat", (a, b), out, lambda g: (g[:, :ca], g[:, ca:]))


def split_channels(x: Tensor, first: int) -> tuple[Tensor, Tensor]:
    c = x.shape[1]
    if not 0 < first < c:
        raise ValueError(f"split point {first} outside (0, {c})")
    lo = _record("split_lo", (x,), x.data[:, :first].copy(),
                 lambda g: (np.concatenate([g, np.zeros_like(x.data[:, first:])], axis=1),))
    hi = _record("split_hi", (x,), x.data[:, first:].copy(),
                 lambda g: (np.concatenate([np.zeros_like(x.data[:, :first]), g], axis=1),))
    return lo, hi


def group_reduce_channels(x: Tensor, group: int, reduce: str = "mean") -> Tensor:
    """Output channel g combines input channels [g*group, (g+1)*group)."""
    n, c, h, w = check_dims(x)
    if group < 1 or c % group:
        raise ValueError(f"{c} channels are not divisible into groups of {group}")
    if reduce not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduce!r}")
    blocks = x.data.reshape(n, c // group, group, h, w)
    out = blocks.sum(axis=2)
    scale = 1.0
    if reduce == "mean":
        scale = 1.0 / group
        out = out * np.asarray(scale, dtype=x.dtype)

    def back(g):
        gi = np.broadcast_to(g[:, :, None] * np.asarray(scale, dtype=g.dtype), (n, c // group, group, h, w))
        return (gi.reshape(n, c, h, w),)

    return _record("group_reduce", (x,), out.astype(x.dtype, copy=False), back)


def depth_to_space(x: Tensor, block: int = 2) -> Tensor:
    """out[n, c, b*i+dy, b*j+dx] = x[n, b*b*c + b*dy + dx, i, j]."""
    n, c, h, w = check_dims(x)
    if c % (block * block):
        raise ValueError(f"{c} channels not divisible by {block * block}")
    oc = c // (block * block)
    out = x.data.reshape(n, oc, block, block, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, oc, h * block, w * block)

    def back(g):
        return (g.reshape(n, oc, h, block, w, block).transpose(0, 1, 3, 5, 2, 4).reshape(n, c, h, w),)

    return _record("depth_to_space", (x,), np.ascontiguousarray(out), back)


def space_to_depth(x: Tensor, block: int = 2) -> Tensor:
    n, c, h, w = check_dims(x)
    if h % block or w % block:
        raise ValueError(f"spatial dims {h}x{w} not divisible by {block}")
    oh, ow = h // block, w // block
    out = x.data.reshape(n, c, oh, block, ow, block).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * block * block, oh, ow)

    def back(g):
        return (g.reshape(n, c, block, block, oh, ow).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h, w),)

    return _record("space_to_depth", (x,), np.ascontiguousarray(out), back)


def zero_interleave(x: Tensor, factor: int = 2, axes: str = "both") -> Tensor:
    """Spread values onto even positions of a grid ``factor`` times larger.

    ``axes`` selects "rows", "cols" or "both"; all other positions are 0.
    """
    if factor != 2:
        raise ValueError("only factor 2 is supported")
    n, c, h, w = check_dims(x)
    fr = factor if axes in ("rows", "both") else 1
    fc = factor if axes in ("cols", "both") else 1
    if fr == fc == 1:
        raise ValueError(f"unknown axes {axes!r}")
    out = np.zeros((n, c, h * fr, w * fc), dtype=x.dtype)
    out[:, :, ::fr, ::fc] = x.data
    t = _record("zero_interleave", (x,), out, lambda g: (np.ascontiguousarray(g[:, :, ::fr, ::fc]),))
    sr, sc = x.nonzero_stride
    t.nonzero_stride = (sr * fr, sc * fc)
    return t


# ---------------------------------------------------------------------------
# convolution


def _same_pads(size: int, k: int, stride: int) -> tuple[int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def _pads(h, w, kh, kw, sh, sw, padding) -> tuple[tuple[int, int], tuple[int, int]]:
    if padding == "same":
        return _same_pads(h, kh, sh), _same_pads(w, kw, sw)
    if padding == "valid":
        if h < kh or w < kw:
            raise ValueError(f"valid padding needs input {h}x{w} >= kernel {kh}x{kw}")
        return (0, 0), (0, 0)
    raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")


def _strides(stride) -> tuple[int, int]:
    sh, sw = (stride, stride) if isinstance(stride, int) else tuple(stride)
    if sh not in (1, 2) or sw not in (1, 2):
        raise ValueError(f"stride must be 1 or 2, got {stride}")
    return sh, sw


def _bias_of(bias, out_channels: int) -> Tensor | None:
    if bias is None:
        return None
    if bias.shape != (out_channels,):
        raise ValueError(f"bias shape {bias.shape} does not match {out_channels} output channels")
    return bias


def _windows(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, ho: int, wo: int) -> np.ndarray:
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, : (ho - 1) * sh + 1 : sh, : (wo - 1) * sw + 1 : sw]


def _scatter_taps(gx_taps: np.ndarray, xp_shape, sh, sw, ho, wo) -> np.ndarray:
    """Sum per-tap gradients (N, C, Ho, Wo, kh, kw) back onto the padded input."""
    dxp = np.zeros(xp_shape, dtype=gx_taps.dtype)
    kh, kw = gx_taps.shape[-2:]
    for a in range(kh):
        for b in range(kw):
            dxp[:, :, a : a + (ho - 1) * sh + 1 : sh, b : b + (wo - 1) * sw + 1 : sw] += gx_taps[..., a, b]
    return dxp


def conv2d(x: Tensor, k: Tensor, bias: Tensor | None = None, stride=1, padding: str = "same") -> Tensor:
    """2-D cross-correlation; ``k`` has shape (O, I, kh, kw)."""
    n, c, h, w = check_dims(x, "input")
    if k.ndim != 4 or min(k.shape) < 1:
        raise ValueError(f"kernel must be 4-D (O, I, kh, kw) with positive dims, got {k.shape}")
    o, i, kh, kw = k.shape
    if i != c:
        raise ValueError(f"kernel expects {i} input channels, input has {c}")
    bias = _bias_of(bias, o)
    sh, sw = _strides(stride)
    (pt, pb), (pl, pr) = _pads(h, w, kh, kw, sh, sw, padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr))) if pt + pb + pl + pr else x.data
    ho = (xp.shape[2] - kh) // sh + 1
    wo = (xp.shape[3] - kw) // sw + 1
    win = _windows(xp, kh, kw, sh, sw, ho, wo)
    kd = k.data
    out = np.tensordot(win, kd, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=np.result_type(x.data, kd))

    fr, fc = x.nonzero_stride
    _count_macs(n * ho * wo * o * i * kh * kw // (fr * fc))

    def back(g):
        gk = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3])) if k.requires_grad else None
        gx = None
        if x.requires_grad:
            taps = np.tensordot(g, kd, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
            dxp = _scatter_taps(taps, xp.shape, sh, sw, ho, wo)
            gx = dxp[:, :, pt : pt + h, pl : pl + w]
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return gx, gk, gb

    return _record("conv2d", (x, k, bias), out, back)


def conv1d_rows(x: Tensor, k: Tensor, bias: Tensor | None = None, stride: int = 1, padding: str = "same") -> Tensor:
    """Vertical 1-D convolution: ``k`` has shape (O, I, kh, 1)."""
    if k.ndim != 4 or k.shape[3] != 1:
        raise ValueError(f"row kernel must have width 1, got {k.shape}")
    return conv2d(x, k, bias, stride=(stride, 1), padding=padding)


def conv1d_cols(x: Tensor, k: Tensor, bias: Tensor | None = None, stride: int = 1, padding: str = "same") -> Tensor:
    """Horizontal 1-D convolution: ``k`` has shape (O, I, 1, kw)."""
    if k.ndim != 4 or k.shape[2] != 1:
        raise ValueError(f"column kernel must have height 1, got {k.shape}")
    return conv2d(x, k, bias, stride=(1, stride), padding=padding)


def depthwise_conv2d(x: Tensor, k: Tensor, bias: Tensor | None = None, stride=1, padding: str = "same") -> Tensor:
    """Per-channel convolution; ``k`` has shape (C, 1, kh, kw)."""
    n, c, h, w = check_dims(x, "input")
    if k.ndim != 4 or k.shape[1] != 1:
        raise ValueError(f"depthwise kernel must be (C, 1, kh, kw), got {k.shape}")
    if k.shape[0] != c:
        raise ValueError(f"depthwise kernel has {k.shape[0]} channels, input has {c}")
    _, _, kh, kw = k.shape
    bias = _bias_of(bias, c)
    sh, sw = _strides(stride)
    (pt, pb), (pl, pr) = _pads(h, w, kh, kw, sh, sw, padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr))) if pt + pb + pl + pr else x.data
    ho = (xp.shape[2] - kh) // sh + 1
    wo = (xp.shape[3] - kw) // sw + 1
    win = _windows(xp, kh, kw, sh, sw, ho, wo)
    kd = k.data[:, 0]
    out = np.einsum("nchwab,cab->nchw", win, kd)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=np.result_type(x.data, kd))

    fr, fc = x.nonzero_stride
    _count_macs(n * ho * wo * c * kh * kw // (fr * fc))

    def back(g):
        gk = np.einsum("nchw,nchwab->cab", g, win)[:, None] if k.requires_grad else None
        gx = None
        if x.requires_grad:
            taps = g[..., None, None] * kd[None, :, None, None]
            gx = _scatter_taps(taps, xp.shape, sh, sw, ho, wo)[:, :, pt : pt + h, pl : pl + w]
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return gx, gk, gb

    return _record("depthwise_conv2d", (x, k, bias), out, back)


def pointwise_conv(x: Tensor, k: Tensor, bias: Tensor | None = None) -> Tensor:
    """1x1 convolution mixing channels only."""
    if k.ndim != 4 or k.shape[2:] != (1, 1):
        raise ValueError(f"pointwise kernel must be (O, I, 1, 1), got {k.shape}")
    return conv2d(x, k, bias, stride=1, padding="same")


# ---------------------------------------------------------------------------
# interpolation


def _keys_cubic(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    t = np.abs(t)
    return np.where(
        t <= 1,
        (a + 2) * t**3 - (a + 3) * t**2 + 1,
        np.where(t < 2, a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a, 0.0),
    )


def resize_matrix(n_in: int, n_out: int, mode: str) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix resampling one axis.

    Half-pixel centres: source ``s = (d + 0.5) * n_in / n_out - 0.5``,
    clamped to ``[0, n_in - 1]``.
    """
    if n_in < 1 or n_out < 1:
        raise ValueError(f"resize sizes must be positive, got {n_in} -> {n_out}")
    d = np.arange(n_out, dtype=np.float64)
    s = np.clip((d + 0.5) * (n_in / n_out) - 0.5, 0.0, n_in - 1)
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    if mode == "nearest":
        m[rows, np.minimum(np.floor(s + 0.5).astype(int), n_in - 1)] = 1.0
    elif mode == "bilinear":
        lo = np.floor(s).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = s - lo
        np.add.at(m, (rows, lo), 1.0 - frac)
        np.add.at(m, (rows, hi), frac)
    elif mode == "bicubic":
        base = np.floor(s).astype(int)
        for off in (-1, 0, 1, 2):
            idx = base + off
            wgt = _keys_cubic(s - idx)
            np.add.at(m, (rows, np.clip(idx, 0, n_in - 1)), wgt)
    else:
        raise ValueError(f"unknown interpolation mode {mode!r}")
    return m


def resize(x: Tensor, out_h: int, out_w: int, mode: str = "bilinear") -> Tensor:
    """Separable resampling to ``out_h`` x ``out_w``."""
    n, c, h, w = check_dims(x, "input")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    rh = resize_matrix(h, out_h, mode).astype(x.dtype)
    rw = resize_matrix(w, out_w, mode).astype(x.dtype)
    out = np.matmul(np.matmul(rh, x.data), rw.T)

    def back(g):
        return (np.matmul(np.matmul(rh.T, g), rw),)

    return _record(f"resize_{mode}", (x,), np.ascontiguousarray(out), back)


def upsample2x(x: Tensor, mode: str = "bilinear") -> Tensor:
    return resize(x, 2 * x.shape[2], 2 * x.shape[3], mode)
