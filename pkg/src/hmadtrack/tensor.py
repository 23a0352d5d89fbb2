"""Dense float64 tensor primitives: conv, pooling, linear, activations, gradient check.

Feature maps are channels-first [C, H, W]; vectors are rank-1 tensors.
All operations are pure and deterministic; tensors are immutable once built.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent with an operation."""


class Tensor:
    """Immutable dense array of 64-bit floats with an explicit shape.

    Wraps a C-contiguous, read-only float64 ndarray. Construction rejects
    empty extents and non-finite values, so no NaN/Inf can flow out of the
    public operations below given finite inputs.
    """

    __slots__ = ("_a",)

    def __init__(self, data):
        a = np.array(data, dtype=np.float64, order="C")
        if a.ndim == 0:
            raise ShapeError("tensor must have rank >= 1")
        if any(n < 1 for n in a.shape):
            raise ShapeError(f"all extents must be >= 1, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("tensor values must be finite")
        a.flags.writeable = False
        self._a = a

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape, dtype=np.float64))

    @classmethod
    def full(cls, shape, value):
        return cls(np.full(shape, value, dtype=np.float64))

    @property
    def array(self):
        """Read-only ndarray view of the data."""
        return self._a

    @property
    def shape(self):
        return self._a.shape

    @property
    def size(self):
        return self._a.size

    def ravel(self):
        """Flat row-major copy of the values."""
        return self._a.ravel().copy()

    def __repr__(self):
        return f"Tensor(shape={self._a.shape})"


def _as_map(t, name):
    if t.array.ndim != 3:
        raise ShapeError(f"{name} must be rank-3 [C,H,W], got shape {t.shape}")
    return t.array


def conv2d(inp, kernels, bias, stride=1, padding=0):
    """Cross-correlate kernels [K,C,kh,kw] over a map [C,H,W] (no kernel flip).

    Zero padding; output extents floor((H + 2*padding - kh)/stride) + 1.
    """
    x = _as_map(inp, "conv2d input")
    k = kernels.array
    if k.ndim != 4:
        raise ShapeError(f"kernels must be rank-4 [K,C,kh,kw], got {kernels.shape}")
    if bias.array.ndim != 1 or bias.array.shape[0] != k.shape[0]:
        raise ShapeError("bias length must equal kernel count")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if padding < 0:
        raise ValueError("padding must be >= 0")
    nk, kc, kh, kw = k.shape
    c, h, w = x.shape
    if kc != c:
        raise ShapeError(f"kernel channels {kc} != input channels {c}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ShapeError("kernel larger than padded input")
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(k, win, axes=([1, 2, 3], [0, 3, 4]))
    out += bias.array[:, None, None]
    return Tensor(out)


def pool_global(inp, mode):
    """Reduce a [C,H,W] map over all sites to a per-channel vector."""
    x = _as_map(inp, "pool_global input")
    if mode == "avg":
        return Tensor(x.mean(axis=(1, 2)))
    if mode == "max":
        return Tensor(x.max(axis=(1, 2)))
    raise ValueError(f"unknown pooling mode {mode!r}")


def pool_spatial(inp, mode):
    """Reduce a [C,H,W] map over channels to a single-channel [1,H,W] map."""
    x = _as_map(inp, "pool_spatial input")
    if mode == "avg":
        return Tensor(x.mean(axis=0, keepdims=True))
    if mode == "max":
        return Tensor(x.max(axis=0, keepdims=True))
    raise ValueError(f"unknown pooling mode {mode!r}")


def linear(inp, weights, bias):
    """Affine map: weights [m,n] @ input [n] + bias [m]."""
    v = inp.array
    w = weights.array
    b = bias.array
    if v.ndim != 1 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError("linear expects vector, matrix, vector")
    if w.shape[1] != v.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeError(
            f"linear dimensions disagree: weights {w.shape}, input {v.shape}, bias {b.shape}"
        )
    return Tensor(w @ v + b)


# Saturation limits: nearest representable doubles inside the open interval,
# so gates stay strictly in (0,1) even where 1/(1+e^-x) would round to 0 or 1.
_SIG_LO = np.nextafter(0.0, 1.0)
_SIG_HI = np.nextafter(1.0, 0.0)


def _sigmoid(x):
    # Stable piecewise form; never materialises exp of a large positive value.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, _SIG_LO, _SIG_HI)


def sigmoid(inp):
    return Tensor(_sigmoid(inp.array))


def relu(inp):
    return Tensor(np.maximum(inp.array, 0.0))


def add(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    return Tensor(a.array + b.array)


def mul(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes differ: {a.shape} vs {b.shape}")
    return Tensor(a.array * b.array)


def broadcast_mul(feature_map, gates):
    """Gate a [C,H,W] map by per-channel gates [C] or a spatial gate [1,H,W]."""
    x = _as_map(feature_map, "broadcast_mul map")
    g = gates.array
    if g.ndim == 1:
        if g.shape[0] != x.shape[0]:
            raise ShapeError(f"gate length {g.shape[0]} != channel count {x.shape[0]}")
        return Tensor(x * g[:, None, None])
    if g.shape == (1,) + x.shape[1:]:
        return Tensor(x * g)
    raise ShapeError(f"gates shape {g.shape} fits neither channels nor sites of {x.shape}")


def grad_check(scalar_fn, analytic_grad, point, eps):
    """Max relative error between an analytic gradient and central differences.

    Per coordinate: |analytic - numeric| / max(1, |numeric|); returns the max
    over all coordinates. A non-finite function value is reported as +inf
    (check failure) rather than raised.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = point.array
    analytic = analytic_grad(point).array
    if analytic.shape != base.shape:
        raise ShapeError("analytic gradient shape differs from the point")
    worst = 0.0
    flat = base.ravel()
    for i in range(flat.size):
        step = np.zeros_like(flat)
        step[i] = eps
        try:
            f_plus = scalar_fn(Tensor((flat + step).reshape(base.shape)))
            f_minus = scalar_fn(Tensor((flat - step).reshape(base.shape)))
        except (ValueError, FloatingPointError):
            return math.inf
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            return math.inf
        numeric = (f_plus - f_minus) / (2.0 * eps)
        err = abs(analytic.ravel()[i] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst
