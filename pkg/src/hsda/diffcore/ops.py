"""Differentiable primitives.

Every function takes/returns :class:`Tensor` and registers a backward rule on
the active tape. Broadcasting is deliberately narrow: elementwise ops accept
identical shapes or a scalar on one side, nothing else. Dedicated primitives
(add_bias, scale_rows, pairwise_absdiff) cover the row/column patterns the
network needs, which keeps every backward rule simple enough to audit.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError
from .tensor import ShapeError, Tensor, active_tape


def _as_tensor(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x), dtype=dtype)


def _out(values: np.ndarray, requires_grad: bool) -> Tensor:
    return Tensor(values, requires_grad=requires_grad, dtype=values.dtype)


def _record(inputs: Sequence[Tensor], out: Tensor, backward_fn, name: str) -> Tensor:
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(inputs, out, backward_fn, name)
    return out


def _requires(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# elementwise arithmetic (same shape or scalar-vs-tensor)


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise ShapeError("%s: shapes %s and %s (only identical or scalar allowed)" % (op, a.shape, b.shape))


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    """Collapse a gradient onto a scalar operand's shape."""
    if g.shape == tuple(shape):
        return g
    return np.asarray(g.sum(), dtype=g.dtype).reshape(shape)


def add(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    _check_elementwise(a, b, "add")
    out = _out(a.values + b.values, _requires(a, b))

    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _record((a, b), out, bwd, "add")


def sub(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    _check_elementwise(a, b, "sub")
    out = _out(a.values - b.values, _requires(a, b))

    def bwd(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _record((a, b), out, bwd, "sub")


def mul(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    _check_elementwise(a, b, "mul")
    av, bv = a.values, b.values
    out = _out(av * bv, _requires(a, b))

    def bwd(g):
        return _reduce_to(g * bv, a.shape), _reduce_to(g * av, b.shape)

    return _record((a, b), out, bwd, "mul")


def neg(a: Tensor) -> Tensor:
    out = _out(-a.values, a.requires_grad)
    return _record((a,), out, lambda g: (-g,), "neg")


def abs_(a: Tensor) -> Tensor:
    """Absolute value; subgradient 0 at exactly 0 (np.sign convention)."""
    sign = np.sign(a.values)
    out = _out(np.abs(a.values), a.requires_grad)
    return _record((a,), out, lambda g: (g * sign,), "abs")


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign to avoid overflow in exp for large |x|.
    v = a.values
    y = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.clip(v, 0, None))),
                 np.exp(np.clip(v, None, 0)) / (1.0 + np.exp(np.clip(v, None, 0))))
    y = y.astype(v.dtype)
    out = _out(y, a.requires_grad)
    return _record((a,), out, lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0
    out = _out(np.where(mask, a.values, 0), a.requires_grad)
    return _record((a,), out, lambda g: (g * mask,), "relu")


def log(a: Tensor) -> Tensor:
    out = _out(np.log(a.values), a.requires_grad)
    return _record((a,), out, lambda g: (g / a.values,), "log")


def clamp_min(a: Tensor, floor: float) -> Tensor:
    """max(x, floor); gradient passes where x >= floor, zero where clamped."""
    mask = a.values >= floor
    out = _out(np.maximum(a.values, floor), a.requires_grad)
    return _record((a,), out, lambda g: (g * mask,), "clamp_min")


# ---------------------------------------------------------------------------
# reductions


def _expand_reduced(g: np.ndarray, shape, axis, keepdims) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g.reshape((1,) * len(shape)), shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    out = _out(a.values.sum(axis=axis, keepdims=keepdims), a.requires_grad)

    def bwd(g):
        return (_expand_reduced(g, a.shape, axis, keepdims).astype(g.dtype, copy=True),)

    return _record((a,), out, bwd, "sum")


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    out = _out(a.values.mean(axis=axis, keepdims=keepdims), a.requires_grad)

    def bwd(g):
        return (_expand_reduced(g, a.shape, axis, keepdims) / count,)

    return _record((a,), out, bwd, "mean")


def max_(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Max along one axis; gradient flows to the first maximal entry."""
    idx = np.argmax(a.values, axis=axis)
    out_v = np.take_along_axis(a.values, np.expand_dims(idx, axis), axis=axis)
    if not keepdims:
        out_v = np.squeeze(out_v, axis=axis)
    out = _out(out_v, a.requires_grad)

    def bwd(g):
        gx = np.zeros_like(a.values)
        ge = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(gx, np.expand_dims(idx, axis), ge, axis=axis)
        return (gx,)

    return _record((a,), out, bwd, "max")


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(a: Tensor, shape) -> Tensor:
    out = _out(a.values.reshape(shape), a.requires_grad)
    return _record((a,), out, lambda g: (g.reshape(a.shape),), "reshape")


def flatten(a: Tensor) -> Tensor:
    """Flatten to a single row vector (1, size), ready for a perceptron."""
    return reshape(a, (1, a.size))


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = _out(np.ascontiguousarray(a.values.transpose(axes)), a.requires_grad)
    return _record((a,), out, lambda g: (g.transpose(inv),), "permute")


def transpose(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeError("transpose expects a matrix, got shape %s" % (a.shape,))
    return permute(a, (1, 0))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    out = _out(np.concatenate([t.values for t in tensors], axis=axis), _requires(*tensors))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _record(tensors, out, bwd, "concat")


def take_row(a: Tensor, i: int) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeError("take_row expects a matrix, got shape %s" % (a.shape,))
    out = _out(a.values[i : i + 1].copy(), a.requires_grad)

    def bwd(g):
        gx = np.zeros_like(a.values)
        gx[i : i + 1] = g
        return (gx,)

    return _record((a,), out, bwd, "take_row")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError("matmul expects matrices, got %s and %s" % (a.shape, b.shape))
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul inner dimensions disagree: %s vs %s" % (a.shape, b.shape))
    out = _out(a.values @ b.values, _requires(a, b))

    def bwd(g):
        return g @ b.values.T, a.values.T @ g

    return _record((a, b), out, bwd, "matmul")


def add_bias(a: Tensor, b: Tensor) -> Tensor:
    """Add a length-n bias vector to every row of an (m, n) matrix."""
    if a.values.ndim != 2 or b.values.ndim != 1 or a.shape[1] != b.shape[0]:
        raise ShapeError("add_bias: matrix %s with bias %s" % (a.shape, b.shape))
    out = _out(a.values + b.values[None, :], _requires(a, b))

    def bwd(g):
        return g, g.sum(axis=0)

    return _record((a, b), out, bwd, "add_bias")


def scale_rows(a: Tensor, s: Tensor) -> Tensor:
    """Multiply row i of an (m, n) matrix by scalar s[i] from an (m, 1) column."""
    if a.values.ndim != 2 or s.shape != (a.shape[0], 1):
        raise ShapeError("scale_rows: matrix %s with scales %s" % (a.shape, s.shape))
    out = _out(a.values * s.values, _requires(a, s))

    def bwd(g):
        return g * s.values, (g * a.values).sum(axis=1, keepdims=True)

    return _record((a, s), out, bwd, "scale_rows")


def pairwise_absdiff(q: Tensor, k: Tensor) -> Tensor:
    """D[i, j, :] = |q_i - k_j| for row sets q (m, d) and k (n, d)."""
    if q.values.ndim != 2 or k.values.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ShapeError("pairwise_absdiff: %s vs %s" % (q.shape, k.shape))
    diff = q.values[:, None, :] - k.values[None, :, :]
    sign = np.sign(diff)
    out = _out(np.abs(diff), _requires(q, k))

    def bwd(g):
        gs = g * sign
        return gs.sum(axis=1), -gs.sum(axis=0)

    return _record((q, k), out, bwd, "pairwise_absdiff")


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction; every output row sums to 1."""
    if a.values.ndim != 2:
        raise ShapeError("softmax_rows expects a matrix, got %s" % (a.shape,))
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _out(y, a.requires_grad)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _record((a,), out, bwd, "softmax_rows")


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / population variance 1, then affine."""
    d = a.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            "layer_norm: last axis %d but gamma %s, beta %s" % (d, gamma.shape, beta.shape)
        )
    mu = a.values.mean(axis=-1, keepdims=True)
    xc = a.values - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = _out(xhat * gamma.values + beta.values, _requires(a, gamma, beta))

    def bwd(g):
        lead = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=lead)
        dbeta = g.sum(axis=lead)
        dxhat = g * gamma.values
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, dgamma, dbeta

    return _record((a, gamma, beta), out, bwd, "layer_norm")


def cosine_similarity(a: Tensor, b: Tensor, floor: float = 1e-8) -> Tensor:
    """Cosine of the angle between two flattened vectors (scalar output).

    The norm product is floored at `floor`; while the floor is active the
    denominator is treated as a constant for the gradient.
    """
    if a.size != b.size:
        raise ShapeError("cosine_similarity: sizes %d vs %d" % (a.size, b.size))
    av = a.values.reshape(-1)
    bv = b.values.reshape(-1)
    na = np.sqrt(av @ av)
    nb = np.sqrt(bv @ bv)
    prod = na * nb
    clamped = prod < floor
    denom = max(prod, floor)
    dot = av @ bv
    c = dot / denom
    out = _out(np.asarray(c, dtype=a.values.dtype), _requires(a, b))

    def bwd(g):
        gs = float(g)
        if clamped:
            da = gs * bv / denom
            db = gs * av / denom
        else:
            da = gs * (bv / denom - c * av / (na * na))
            db = gs * (av / denom - c * bv / (nb * nb))
        return da.reshape(a.shape).astype(a.values.dtype), db.reshape(b.shape).astype(b.values.dtype)

    return _record((a, b), out, bwd, "cosine_similarity")


# ---------------------------------------------------------------------------
# pooling


def _pool_bins(length: int, out_len: int):
    i = np.arange(out_len)
    starts = (i * length) // out_len
    ends = -(-((i + 1) * length) // out_len)
    return starts, ends


def adaptive_avg_pool1d(a: Tensor, out_len: int) -> Tensor:
    """Average each channel of a (C, T) matrix into out_len bins."""
    if a.values.ndim != 2:
        raise ShapeError("adaptive_avg_pool1d expects (C, T), got %s" % (a.shape,))
    C, T = a.shape
    starts, ends = _pool_bins(T, out_len)
    y = np.empty((C, out_len), dtype=a.values.dtype)
    for i in range(out_len):
        y[:, i] = a.values[:, starts[i] : ends[i]].mean(axis=1)
    out = _out(y, a.requires_grad)

    def bwd(g):
        gx = np.zeros_like(a.values)
        for i in range(out_len):
            gx[:, starts[i] : ends[i]] += g[:, i : i + 1] / (ends[i] - starts[i])
        return (gx,)

    return _record((a,), out, bwd, "adaptive_avg_pool1d")


def adaptive_max_pool1d(a: Tensor, out_len: int) -> Tensor:
    """Max over each bin; gradient goes to the first maximal entry per bin."""
    if a.values.ndim != 2:
        raise ShapeError("adaptive_max_pool1d expects (C, T), got %s" % (a.shape,))
    C, T = a.shape
    starts, ends = _pool_bins(T, out_len)
    y = np.empty((C, out_len), dtype=a.values.dtype)
    arg = np.empty((C, out_len), dtype=np.int64)
    for i in range(out_len):
        window = a.values[:, starts[i] : ends[i]]
        aw = window.argmax(axis=1)
        arg[:, i] = starts[i] + aw
        y[:, i] = np.take_along_axis(window, aw[:, None], axis=1)[:, 0]
    out = _out(y, a.requires_grad)

    def bwd(g):
        gx = np.zeros_like(a.values)
        rows = np.arange(C)[:, None]
        np.add.at(gx, (np.broadcast_to(rows, arg.shape), arg), g)
        return (gx,)

    return _record((a,), out, bwd, "adaptive_max_pool1d")


# ---------------------------------------------------------------------------
# convolutions (cross-correlation semantics, no kernel flip)


def _conv_out_len(L: int, k: int, stride: int, padding: int) -> int:
    return (L + 2 * padding - k) // stride + 1


def _im2col1d(xp: np.ndarray, k: int, stride: int, T_out: int) -> np.ndarray:
    # xp: (C, Tp) -> (C, k, T_out)
    C = xp.shape[0]
    cols = np.empty((C, k, T_out), dtype=xp.dtype)
    for j in range(k):
        cols[:, j, :] = xp[:, j : j + stride * T_out : stride]
    return cols

def _col2im1d(cols: np.ndarray, Tp: int, k: int, stride: int, T_out: int) -> np.ndarray:
    C = cols.shape[0]
    xp = np.zeros((C, Tp), dtype=cols.dtype)
    for j in range(k):
        xp[:, j : j + stride * T_out : stride] += cols[:, j, :]
    return xp


def conv1d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """1D cross-correlation over the last axis.

    x is (C_in, T) or batched (B, C_in, T); w is (C_out, C_in/groups, k).
    Depthwise = groups == C_in with C_out == C_in.
    """
    if w.values.ndim != 3:
        raise ShapeError("conv1d weight must be (C_out, C_in/g, k), got %s" % (w.shape,))
    batched = x.values.ndim == 3
    if not batched and x.values.ndim != 2:
        raise ShapeError("conv1d input must be (C, T) or (B, C, T), got %s" % (x.shape,))
    xv = x.values if batched else x.values[None]
    B, C_in, T = xv.shape
    C_out, C_g, k = w.shape
    if k % 2 == 0:
        raise ConfigError("conv1d kernel size must be odd, got %d" % k)
    if C_in % groups or C_out % groups:
        raise ConfigError(
            "conv1d channels (%d in, %d out) not divisible by groups=%d" % (C_in, C_out, groups)
        )
    if C_g != C_in // groups:
        raise ShapeError("conv1d weight %s inconsistent with C_in=%d groups=%d" % (w.shape, C_in, groups))
    T_out = _conv_out_len(T, k, stride, padding)
    if T_out < 1:
        raise ShapeError("conv1d output length %d < 1 (T=%d k=%d)" % (T_out, T, k))

    xp = np.pad(xv, ((0, 0), (0, 0), (padding, padding))) if padding else xv
    Tp = xp.shape[2]
    cols = np.empty((B, C_in, k, T_out), dtype=xp.dtype)
    for b in range(B):
        cols[b] = _im2col1d(xp[b], k, stride, T_out)

    og = C_out // groups
    y = np.empty((B, C_out, T_out), dtype=xp.dtype)
    for g in range(groups):
        wg = w.values[g * og : (g + 1) * og].reshape(og, C_g * k)
        cg = cols[:, g * C_g : (g + 1) * C_g].reshape(B, C_g * k, T_out)
        y[:, g * og : (g + 1) * og] = np.einsum("op,bpt->bot", wg, cg, optimize=True)
    if bias is not None:
        if bias.shape != (C_out,):
            raise ShapeError("conv1d bias must be (C_out,), got %s" % (bias.shape,))
        y += bias.values[None, :, None]

    inputs = (x, w) if bias is None else (x, w, bias)
    out_v = y if batched else y[0]
    out = _out(out_v, _requires(*inputs))

    def bwd(g):
        gb = g if batched else g[None]
        dw = np.zeros_like(w.values)
        dcols = np.empty_like(cols)
        for gi in range(groups):
            sl_o = slice(gi * og, (gi + 1) * og)
            sl_c = slice(gi * C_g, (gi + 1) * C_g)
            cg = cols[:, sl_c].reshape(B, C_g * k, T_out)
            gg = gb[:, sl_o]
            dw[sl_o] = np.einsum("bot,bpt->op", gg, cg, optimize=True).reshape(og, C_g, k)
            wg = w.values[sl_o].reshape(og, C_g * k)
            dcols[:, sl_c] = np.einsum("op,bot->bpt", wg, gg, optimize=True).reshape(B, C_g, k, T_out)
        dxp = np.zeros((B, C_in, Tp), dtype=g.dtype)
        for b in range(B):
            dxp[b] = _col2im1d(dcols[b], Tp, k, stride, T_out)
        dx = dxp[:, :, padding : Tp - padding] if padding else dxp
        dx = dx if batched else dx[0]
        if bias is None:
            return dx, dw
        return dx, dw, gb.sum(axis=(0, 2))

    return _record(inputs, out, bwd, "conv1d")


def _im2col2d(xp: np.ndarray, kh: int, kw: int, stride: int, H_out: int, W_out: int) -> np.ndarray:
    # xp: (C, Hp, Wp) -> (C, kh*kw, H_out*W_out)
    C = xp.shape[0]
    cols = np.empty((C, kh, kw, H_out, W_out), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, i : i + stride * H_out : stride, j : j + stride * W_out : stride]
    return cols.reshape(C, kh * kw, H_out * W_out)


def _col2im2d(cols, Hp, Wp, kh, kw, stride, H_out, W_out):
    C = cols.shape[0]
    xp = np.zeros((C, Hp, Wp), dtype=cols.dtype)
    cols = cols.reshape(C, kh, kw, H_out, W_out)
    for i in range(kh):
        for j in range(kw):
            xp[:, i : i + stride * H_out : stride, j : j + stride * W_out : stride] += cols[:, i, j]
    return xp


def conv2d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """2D cross-correlation. x is (C_in, H, W); w is (C_out, C_in/groups, kh, kw)."""
    if x.values.ndim != 3:
        raise ShapeError("conv2d input must be (C, H, W), got %s" % (x.shape,))
    if w.values.ndim != 4:
        raise ShapeError("conv2d weight must be (C_out, C_in/g, kh, kw), got %s" % (w.shape,))
    C_in, H, W = x.shape
    C_out, C_g, kh, kw = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError("conv2d kernel extents must be odd, got %dx%d" % (kh, kw))
    if C_in % groups or C_out % groups:
        raise ConfigError(
            "conv2d channels (%d in, %d out) not divisible by groups=%d" % (C_in, C_out, groups)
        )
    if C_g != C_in // groups:
        raise ShapeError("conv2d weight %s inconsistent with C_in=%d groups=%d" % (w.shape, C_in, groups))
    H_out = _conv_out_len(H, kh, stride, padding)
    W_out = _conv_out_len(W, kw, stride, padding)
    if H_out < 1 or W_out < 1:
        raise ShapeError("conv2d output %dx%d < 1 (input %dx%d)" % (H_out, W_out, H, W))

    xp = np.pad(x.values, ((0, 0), (padding, padding), (padding, padding))) if padding else x.values
    Hp, Wp = xp.shape[1:]
    cols = _im2col2d(xp, kh, kw, stride, H_out, W_out)  # (C_in, kh*kw, L)
    L = H_out * W_out
    og = C_out // groups
    y = np.empty((C_out, L), dtype=xp.dtype)
    for g in range(groups):
        wg = w.values[g * og : (g + 1) * og].reshape(og, C_g * kh * kw)
        cg = cols[g * C_g : (g + 1) * C_g].reshape(C_g * kh * kw, L)
        y[g * og : (g + 1) * og] = wg @ cg
    if bias is not None:
        if bias.shape != (C_out,):
            raise ShapeError("conv2d bias must be (C_out,), got %s" % (bias.shape,))
        y += bias.values[:, None]
    y = y.reshape(C_out, H_out, W_out)

    inputs = (x, w) if bias is None else (x, w, bias)
    out = _out(y, _requires(*inputs))

    def bwd(g):
        gf = g.reshape(C_out, L)
        dw = np.zeros_like(w.values)
        dcols = np.empty_like(cols)
        for gi in range(groups):
            sl_o = slice(gi * og, (gi + 1) * og)
            sl_c = slice(gi * C_g, (gi + 1) * C_g)
            cg = cols[sl_c].reshape(C_g * kh * kw, L)
            dw[sl_o] = (gf[sl_o] @ cg.T).reshape(og, C_g, kh, kw)
            wg = w.values[sl_o].reshape(og, C_g * kh * kw)
            dcols[sl_c] = (wg.T @ gf[sl_o]).reshape(C_g, kh * kw, L)
        dxp = _col2im2d(dcols, Hp, Wp, kh, kw, stride, H_out, W_out)
        dx = dxp[:, padding : Hp - padding, padding : Wp - padding] if padding else dxp
        if bias is None:
            return dx, dw
        return dx, dw, gf.sum(axis=1)

    return _record(inputs, out, bwd, "conv2d")


# ---------------------------------------------------------------------------
# operator sugar on Tensor

def _coerce_binop(fn):
    def op(self, other):
        return fn(self, other)

    return op


Tensor.__add__ = _coerce_binop(add)
Tensor.__radd__ = _coerce_binop(lambda a, b: add(b, a))
Tensor.__sub__ = _coerce_binop(sub)
Tensor.__rsub__ = _coerce_binop(lambda a, b: sub(b, a))
Tensor.__mul__ = _coerce_binop(mul)
Tensor.__rmul__ = _coerce_binop(lambda a, b: mul(b, a))
Tensor.__matmul__ = _coerce_binop(matmul)
Tensor.__neg__ = neg
