"""Hierarchical modality aggregation and distribution fusion.

Two stages: channel-then-spatial attention over concatenated shallow RGB/depth
features (rescaled to the deep grid), and three-branch gating of deep RGB,
deep depth, and rescaled shallow features from a shared global descriptor.

Forward passes operate on Tensor values; matching hand-derived backward passes
(numpy level) back the gradient-check suite. Parameters are seeded or loaded,
never trained here.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, _sigmoid


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ChannelAttnParams:
    """Shared two-layer bottleneck MLP applied to both pooled descriptors."""

    w1: np.ndarray  # [C/r, C]
    b1: np.ndarray  # [C/r]
    w2: np.ndarray  # [C, C/r]
    b2: np.ndarray  # [C]

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        hidden, channels = self.w1.shape
        if self.w2.shape != (channels, hidden):
            raise ShapeError(f"mlp layer shapes disagree: {self.w1.shape} vs {self.w2.shape}")
        if self.b1.shape != (hidden,) or self.b2.shape != (channels,):
            raise ShapeError("mlp bias shapes disagree with weights")

    @property
    def channels(self):
        return self.w1.shape[1]

    @classmethod
    def seeded(cls, channels, reduction, rng):
        if channels % reduction != 0:
            raise ValueError(f"reduction {reduction} must divide channel count {channels}")
        hidden = channels // reduction
        return cls(
            w1=_uniform_fan_in(rng, (hidden, channels), channels),
            b1=np.zeros(hidden),
            w2=_uniform_fan_in(rng, (channels, hidden), hidden),
            b2=np.zeros(channels),
        )


@dataclass
class SpatialAttnParams:
    """7x7 convolution over stacked channel-avg/channel-max maps."""

    kernel: np.ndarray  # [1,2,7,7]
    bias: np.ndarray  # [1]

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernel.shape != (1, 2, 7, 7):
            raise ShapeError(f"spatial attention kernel must be [1,2,7,7], got {self.kernel.shape}")
        if self.bias.shape != (1,):
            raise ShapeError("spatial attention bias must have length 1")

    @classmethod
    def seeded(cls, rng):
        return cls(kernel=_uniform_fan_in(rng, (1, 2, 7, 7), 2 * 49), bias=np.zeros(1))


@dataclass
class CbamParams:
    channel: ChannelAttnParams
    spatial: SpatialAttnParams

    @classmethod
    def seeded(cls, channels, reduction, rng):
        return cls(
            channel=ChannelAttnParams.seeded(channels, reduction, rng),
            spatial=SpatialAttnParams.seeded(rng),
        )


@dataclass
class DistributionParams:
    """Global descriptor projection plus one gating layer per branch (R, D, S)."""

    w_global: np.ndarray  # [d, C]
    b_global: np.ndarray  # [d]
    w_r: np.ndarray  # [C, d]
    b_r: np.ndarray  # [C]
    w_d: np.ndarray
    b_d: np.ndarray
    w_s: np.ndarray
    b_s: np.ndarray

    def __post_init__(self):
        for name in ("w_global", "b_global", "w_r", "b_r", "w_d", "b_d", "w_s", "b_s"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        d, c = self.w_global.shape
        if self.b_global.shape != (d,):
            raise ShapeError("global bias length disagrees with projection rows")
        for w, b in ((self.w_r, self.b_r), (self.w_d, self.b_d), (self.w_s, self.b_s)):
            if w.shape != (c, d) or b.shape != (c,):
                raise ShapeError(f"branch layer must map [{d}]->[{c}], got {w.shape}")

    @property
    def channels(self):
        return self.w_global.shape[1]

    @classmethod
    def seeded(cls, channels, rng, descriptor_width=None):
        d = descriptor_width or max(4, channels // 4)
        branch = lambda: _uniform_fan_in(rng, (channels, d), d)
        return cls(
            w_global=_uniform_fan_in(rng, (d, channels), channels),
            b_global=np.zeros(d),
            w_r=branch(),
            b_r=np.zeros(channels),
            w_d=branch(),
            b_d=np.zeros(channels),
            w_s=branch(),
            b_s=np.zeros(channels),
        )


@dataclass(frozen=True)
class FeatureGeometry:
    """Declared shapes the fusion network is built for."""

    shallow_channels: int  # per modality
    shallow_size: tuple  # (Hs, Ws)
    deep_channels: int
    deep_size: tuple  # (H, W)

    @property
    def shallow_shape(self):
        return (self.shallow_channels,) + tuple(self.shallow_size)

    @property
    def deep_shape(self):
        return (self.deep_channels,) + tuple(self.deep_size)


@dataclass
class FusionParams:
    geometry: FeatureGeometry
    shallow_attn: CbamParams  # over 2*Cs concatenated channels
    rescale: list  # [(kernel [K,C,3,3], bias [K]), ...] stride-2 except a lone stride-1 projection
    dist: DistributionParams

    def __post_init__(self):
        g = self.geometry
        h, w = g.shallow_size
        c = 2 * g.shallow_channels
        if self.shallow_attn.channel.channels != c:
            raise ShapeError("shallow attention sized for wrong channel count")
        for kernel, bias in self.rescale:
            if kernel.shape[1] != c or bias.shape != (kernel.shape[0],):
                raise ShapeError(f"rescale conv expects {c} input channels, got {kernel.shape}")
            c = kernel.shape[0]
            stride = 1 if (h, w) == g.deep_size else 2
            h = (h + 2 - kernel.shape[2]) // stride + 1
            w = (w + 2 - kernel.shape[3]) // stride + 1
        if (h, w) != tuple(g.deep_size) or c != g.deep_channels:
            raise ShapeError(
                f"rescale stack yields {(c, h, w)}, declared deep shape is {g.deep_shape}"
            )
        if self.dist.channels != g.deep_channels:
            raise ShapeError("distribution params sized for wrong deep channel count")

    @classmethod
    def seeded(cls, geometry, seed, reduction=16):
        """Gate layers use uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights; the
        feature-carrying rescale convolutions use a variance-preserving gain so
        the shallow branch arrives at a magnitude comparable to the deep maps.
        All biases are zero.
        """
        rng = np.random.default_rng(seed)
        cat = 2 * geometry.shallow_channels
        shallow_attn = CbamParams.seeded(cat, reduction, rng)
        rescale = []
        h, w = geometry.shallow_size
        c = cat
        if (h, w) == tuple(geometry.deep_size):
            rescale.append(
                (_uniform_fan_in(rng, (geometry.deep_channels, c, 3, 3), c * 9, gain=np.sqrt(6.0)),
                 np.zeros(geometry.deep_channels))
            )
        while (h, w) != tuple(geometry.deep_size):
            nh, nw = (h - 1) // 2 + 1, (w - 1) // 2 + 1
            if nh < geometry.deep_size[0] or nw < geometry.deep_size[1]:
                raise ShapeError(
                    f"shallow size {geometry.shallow_size} cannot be halved down to {geometry.deep_size}"
                )
            out_c = geometry.deep_channels
            rescale.append(
                (_uniform_fan_in(rng, (out_c, c, 3, 3), c * 9, gain=np.sqrt(6.0)), np.zeros(out_c))
            )
            h, w, c = nh, nw, out_c
        return cls(geometry=geometry, shallow_attn=shallow_attn, rescale=rescale,
                   dist=DistributionParams.seeded(geometry.deep_channels, rng))


def _uniform_fan_in(rng, shape, fan_in, gain=1.0):
    bound = gain / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------------------
# forward passes (with caches for the backward passes below)


def _channel_attention_fwd(x, p):
    hw = x.shape[1] * x.shape[2]
    avg = x.mean(axis=(1, 2))
    flat = x.reshape(x.shape[0], hw)
    max_idx = flat.argmax(axis=1)
    mx = flat[np.arange(x.shape[0]), max_idx]

    def mlp(v):
        z1 = p.w1 @ v + p.b1
        h = np.maximum(z1, 0.0)
        return p.w2 @ h + p.b2, (v, z1, h)

    out_avg, cache_avg = mlp(avg)
    out_max, cache_max = mlp(mx)
    pre = out_avg + out_max
    gates = _sigmoid(pre)
    return gates, (x.shape, max_idx, cache_avg, cache_max, gates)


def _mlp_bwd(dout, cache, p, grads):
    v, z1, h = cache
    grads["w2"] += np.outer(dout, h)
    grads["b2"] += dout
    dz1 = (p.w2.T @ dout) * (z1 > 0.0)
    grads["w1"] += np.outer(dz1, v)
    grads["b1"] += dz1
    return p.w1.T @ dz1


def _channel_attention_bwd(dgates, cache, p):
    shape, max_idx, cache_avg, cache_max, gates = cache
    c, h, w = shape
    dpre = dgates * gates * (1.0 - gates)
    grads = {k: np.zeros_like(getattr(p, k)) for k in ("w1", "b1", "w2", "b2")}
    davg = _mlp_bwd(dpre, cache_avg, p, grads)
    dmax = _mlp_bwd(dpre, cache_max, p, grads)
    dx = np.broadcast_to((davg / (h * w))[:, None, None], shape).copy()
    dx.reshape(c, h * w)[np.arange(c), max_idx] += dmax
    return dx, grads


def _conv2d_fwd(x, kernel, bias, stride, padding):
    kh, kw = kernel.shape[2:]
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding))) if padding else x
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(kernel, win, axes=([1, 2, 3], [0, 3, 4])) + bias[:, None, None]
    return out, xp


def _conv2d_bwd(xp, kernel, dout, stride, padding, input_shape):
    _, _, kh, kw = kernel.shape
    ho, wo = dout.shape[1:]
    dxp = np.zeros_like(xp)
    dk = np.zeros_like(kernel)
    db = dout.sum(axis=(1, 2))
    for di in range(kh):
        for dj in range(kw):
            patch = xp[:, di:di + stride * ho:stride, dj:dj + stride * wo:stride]
            dk[:, :, di, dj] = np.tensordot(dout, patch, axes=([1, 2], [1, 2]))
            dxp[:, di:di + stride * ho:stride, dj:dj + stride * wo:stride] += np.tensordot(
                kernel[:, :, di, dj], dout, axes=([0], [0])
            )
    if padding:
        dx = dxp[:, padding:padding + input_shape[1], padding:padding + input_shape[2]]
    else:
        dx = dxp
    return dx, dk, db


def _spatial_attention_fwd(x, p):
    c = x.shape[0]
    avg = x.mean(axis=0)
    max_ch = x.argmax(axis=0)
    mx = np.take_along_axis(x, max_ch[None], axis=0)[0]
    stacked = np.stack([avg, mx])
    pre, xp = _conv2d_fwd(stacked, p.kernel, p.bias, stride=1, padding=3)
    gates = _sigmoid(pre)
    return gates, (c, x.shape, max_ch, stacked, xp, gates)


def _spatial_attention_bwd(dgates, cache, p):
    c, shape, max_ch, stacked, xp, gates = cache
    dpre = dgates * gates * (1.0 - gates)
    dstacked, dk, db = _conv2d_bwd(xp, p.kernel, dpre, stride=1, padding=3, input_shape=stacked.shape)
    dx = np.broadcast_to(dstacked[0] / c, shape).copy()
    ii, jj = np.indices(shape[1:])
    np.add.at(dx, (max_ch, ii, jj), dstacked[1])
    return dx, {"kernel": dk, "bias": db}


def _cbam_fwd(x, p):
    ch_gates, ch_cache = _channel_attention_fwd(x, p.channel)
    gated = x * ch_gates[:, None, None]
    sp_gates, sp_cache = _spatial_attention_fwd(gated, p.spatial)
    out = gated * sp_gates
    return out, (x, ch_gates, ch_cache, gated, sp_gates, sp_cache)


def _cbam_bwd(dout, cache, p):
    x, ch_gates, ch_cache, gated, sp_gates, sp_cache = cache
    dgated = dout * sp_gates
    dsp = (dout * gated).sum(axis=0, keepdims=True)
    dgated_sa, sp_grads = _spatial_attention_bwd(dsp, sp_cache, p.spatial)
    dgated = dgated + dgated_sa
    dx = dgated * ch_gates[:, None, None]
    dch = (dgated * x).sum(axis=(1, 2))
    dx_ca, ch_grads = _channel_attention_bwd(dch, ch_cache, p.channel)
    return dx + dx_ca, ch_grads, sp_grads


def _distribute_fwd(f_r, f_d, f_s, p):
    total = f_r + f_d + f_s
    pooled = total.mean(axis=(1, 2))
    descriptor = p.w_global @ pooled + p.b_global
    pre = {
        "r": p.w_r @ descriptor + p.b_r,
        "d": p.w_d @ descriptor + p.b_d,
        "s": p.w_s @ descriptor + p.b_s,
    }
    gates = {k: _sigmoid(v) for k, v in pre.items()}
    out_r = f_r * gates["r"][:, None, None]
    out_d = f_d * gates["d"][:, None, None]
    out_s = f_s * gates["s"][:, None, None]
    fused = out_r + out_d + out_s
    cache = (f_r, f_d, f_s, pooled, descriptor, gates)
    return (out_r, out_d, out_s, fused), cache


def _distribute_bwd(dfused, cache, p):
    f_r, f_d, f_s, pooled, descriptor, gates = cache
    hw = f_r.shape[1] * f_r.shape[2]
    grads = {k: np.zeros_like(getattr(p, k)) for k in
             ("w_global", "b_global", "w_r", "b_r", "w_d", "b_d", "w_s", "b_s")}
    dins = {}
    ddesc = np.zeros_like(descriptor)
    for key, f in (("r", f_r), ("d", f_d), ("s", f_s)):
        g = gates[key]
        dins[key] = dfused * g[:, None, None]
        dgate = (dfused * f).sum(axis=(1, 2))
        dpre = dgate * g * (1.0 - g)
        grads["w_" + key] += np.outer(dpre, descriptor)
        grads["b_" + key] += dpre
        ddesc += getattr(p, "w_" + key).T @ dpre
    grads["w_global"] += np.outer(ddesc, pooled)
    grads["b_global"] += ddesc
    dpooled = p.w_global.T @ ddesc
    dtotal = np.broadcast_to((dpooled / hw)[:, None, None], f_r.shape)
    return dins["r"] + dtotal, dins["d"] + dtotal, dins["s"] + dtotal, grads


def _rescale_fwd(x, params):
    h = x
    n = len(params.rescale)
    for i, (kernel, bias) in enumerate(params.rescale):
        stride = 1 if h.shape[1:] == tuple(params.geometry.deep_size) else 2
        h, _ = _conv2d_fwd(h, kernel, bias, stride=stride, padding=1)
        if i < n - 1:
            h = np.maximum(h, 0.0)
    return h


# ---------------------------------------------------------------------------
# public operations


def channel_attention(feature, p):
    """Per-channel gates from globally avg- and max-pooled descriptors.

    gates = sigmoid(mlp(avgpool(F)) + mlp(maxpool(F))), one shared MLP.
    """
    x = feature.array
    if x.ndim != 3 or x.shape[0] != p.channels:
        raise ShapeError(f"feature {feature.shape} does not match {p.channels} channels")
    gates, _ = _channel_attention_fwd(x, p)
    return Tensor(gates)


def spatial_attention(feature, p):
    """Per-site gate map from channel-avg/channel-max maps through a 7x7 conv."""
    x = feature.array
    if x.ndim != 3:
        raise ShapeError(f"feature must be [C,H,W], got {feature.shape}")
    gates, _ = _spatial_attention_fwd(x, p)
    return Tensor(gates)


def cbam(feature, p):
    """Channel attention followed by spatial attention, both multiplicative."""
    x = feature.array
    if x.ndim != 3 or x.shape[0] != p.channel.channels:
        raise ShapeError(f"feature {feature.shape} does not match attention params")
    out, _ = _cbam_fwd(x, p)
    return Tensor(out)


def aggregate_shallow(rgb_shallow, depth_shallow, params):
    """Concatenate shallow modality maps, attend, rescale to the deep grid."""
    if rgb_shallow.shape != depth_shallow.shape:
        raise ShapeError(
            f"shallow maps disagree: {rgb_shallow.shape} vs {depth_shallow.shape}"
        )
    if rgb_shallow.shape != params.geometry.shallow_shape:
        raise ShapeError(
            f"shallow maps {rgb_shallow.shape} do not match geometry {params.geometry.shallow_shape}"
        )
    cat = np.concatenate([rgb_shallow.array, depth_shallow.array], axis=0)
    attended, _ = _cbam_fwd(cat, params.shallow_attn)
    return Tensor(_rescale_fwd(attended, params))


def distribute(f_r, f_d, f_s, p):
    """Gate each branch from a shared pooled descriptor and sum.

    Returns (gated_r, gated_d, gated_s, fused).
    """
    if not (f_r.shape == f_d.shape == f_s.shape):
        raise ShapeError(f"branch shapes differ: {f_r.shape}, {f_d.shape}, {f_s.shape}")
    if f_r.array.ndim != 3 or f_r.shape[0] != p.channels:
        raise ShapeError(f"branch shape {f_r.shape} does not match {p.channels} channels")
    (out_r, out_d, out_s, fused), _ = _distribute_fwd(f_r.array, f_d.array, f_s.array, p)
    return Tensor(out_r), Tensor(out_d), Tensor(out_s), Tensor(fused)


FUSE_MODES = ("full", "no_distribution", "no_attention", "baseline_add")


def fuse(rgb_deep, depth_deep, rgb_shallow, depth_shallow, params, mode="full"):
    """Produce the fused deep-grid feature map under one of the ablation modes.

    full            attention + rescale on shallow, three-branch gating
    no_distribution attention kept, gating dropped (plain sum of branches)
    no_attention    gating kept, shallow attention dropped
    baseline_add    element-wise sum of the deep maps only
    """
    if mode not in FUSE_MODES:
        raise ValueError(f"unknown fusion mode {mode!r}")
    if rgb_deep.shape != depth_deep.shape:
        raise ShapeError(f"deep maps disagree: {rgb_deep.shape} vs {depth_deep.shape}")
    if mode == "baseline_add":
        return Tensor(rgb_deep.array + depth_deep.array)
    if rgb_deep.shape != params.geometry.deep_shape:
        raise ShapeError(
            f"deep maps {rgb_deep.shape} do not match geometry {params.geometry.deep_shape}"
        )
    if mode == "no_attention":
        if rgb_shallow.shape != depth_shallow.shape:
            raise ShapeError("shallow maps disagree")
        cat = np.concatenate([rgb_shallow.array, depth_shallow.array], axis=0)
        shallow = Tensor(_rescale_fwd(cat, params))
    else:
        shallow = aggregate_shallow(rgb_shallow, depth_shallow, params)
    if mode == "no_distribution":
        return Tensor(rgb_deep.array + depth_deep.array + shallow.array)
    return distribute(rgb_deep, depth_deep, shallow, params.dist)[3]


# ---------------------------------------------------------------------------
# flat binary parameter container

PARAMS_MAGIC = b"HMADPAR1"


def save_tensors(path, named):
    """Write an ordered name->array mapping as a flat binary container."""
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC)
        for name, arr in named.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_tensors(path):
    """Read a container written by save_tensors; returns name->array in file order."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != PARAMS_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:8]!r}")
    named = {}
    off = 8
    while off < len(blob):
        if off + 4 > len(blob):
            raise ValueError(f"{path}: truncated record header at byte {off}")
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        end = off + 8 * count
        if end > len(blob):
            raise ValueError(f"{path}: truncated data for {name!r} at byte {off}")
        named[name] = np.frombuffer(blob[off:end], dtype="<f8").reshape(shape).copy()
        off = end
    return named


def params_to_tensors(params):
    g = params.geometry
    named = {
        "geometry": np.array(
            [g.shallow_channels, *g.shallow_size, g.deep_channels, *g.deep_size], dtype=np.float64
        ),
        "shallow.ca.w1": params.shallow_attn.channel.w1,
        "shallow.ca.b1": params.shallow_attn.channel.b1,
        "shallow.ca.w2": params.shallow_attn.channel.w2,
        "shallow.ca.b2": params.shallow_attn.channel.b2,
        "shallow.sa.kernel": params.shallow_attn.spatial.kernel,
        "shallow.sa.bias": params.shallow_attn.spatial.bias,
    }
    for i, (kernel, bias) in enumerate(params.rescale):
        named[f"rescale.{i}.kernel"] = kernel
        named[f"rescale.{i}.bias"] = bias
    d = params.dist
    named.update({
        "dist.global.w": d.w_global, "dist.global.b": d.b_global,
        "dist.r.w": d.w_r, "dist.r.b": d.b_r,
        "dist.d.w": d.w_d, "dist.d.b": d.b_d,
        "dist.s.w": d.w_s, "dist.s.b": d.b_s,
    })
    return named


def params_from_tensors(named):
    geo = named["geometry"].astype(int)
    geometry = FeatureGeometry(
        shallow_channels=int(geo[0]),
        shallow_size=(int(geo[1]), int(geo[2])),
        deep_channels=int(geo[3]),
        deep_size=(int(geo[4]), int(geo[5])),
    )
    shallow_attn = CbamParams(
        channel=ChannelAttnParams(
            named["shallow.ca.w1"], named["shallow.ca.b1"],
            named["shallow.ca.w2"], named["shallow.ca.b2"],
        ),
        spatial=SpatialAttnParams(named["shallow.sa.kernel"], named["shallow.sa.bias"]),
    )
    rescale = []
    i = 0
    while f"rescale.{i}.kernel" in named:
        rescale.append((named[f"rescale.{i}.kernel"], named[f"rescale.{i}.bias"]))
        i += 1
    dist = DistributionParams(
        w_global=named["dist.global.w"], b_global=named["dist.global.b"],
        w_r=named["dist.r.w"], b_r=named["dist.r.b"],
        w_d=named["dist.d.w"], b_d=named["dist.d.b"],
        w_s=named["dist.s.w"], b_s=named["dist.s.b"],
    )
    return FusionParams(geometry=geometry, shallow_attn=shallow_attn, rescale=rescale, dist=dist)


def save_params(params, path):
    save_tensors(path, params_to_tensors(params))


def load_params(path):
    return params_from_tensors(load_tensors(path))


# ---------------------------------------------------------------------------
# gradient-check suite


def _check_tensor(scalar_fn, grad_arr, point_arr, eps):
    from .tensor import grad_check

    return grad_check(scalar_fn, lambda _t: Tensor(np.asarray(grad_arr)), Tensor(point_arr), eps)


def gradient_suite(eps=1e-5, seed=1234, perturb=0.0):
    """Central-difference checks for the four attention/gating blocks.

    Checks the analytic gradient of the scalar-summed block output with
    respect to the input map(s) and every parameter tensor. Returns
    [(block_name, max_relative_error), ...]. `perturb` shifts the analytic
    gradients and serves as a negative control.
    """
    rng = np.random.default_rng(seed)
    results = []

    # channel attention: C=8, 5x5, reduction 2
    ca = ChannelAttnParams.seeded(8, 2, rng)
    ca_x = rng.standard_normal((8, 5, 5))

    def ca_scalar(x, p):
        return float(_channel_attention_fwd(x, p)[0].sum())

    gates, cache = _channel_attention_fwd(ca_x, ca)
    dx, grads = _channel_attention_bwd(np.ones_like(gates), cache, ca)
    errs = [_check_tensor(lambda t: ca_scalar(t.array, ca), dx + perturb, ca_x, eps)]
    for name in ("w1", "b1", "w2", "b2"):
        errs.append(_check_tensor(
            lambda t, n=name: ca_scalar(ca_x, replace(ca, **{n: t.array})),
            grads[name] + perturb, getattr(ca, name), eps,
        ))
    results.append(("channel_attention", max(errs)))

    # spatial attention: C=4, 6x6
    sa = SpatialAttnParams.seeded(rng)
    sa_x = rng.standard_normal((4, 6, 6))

    def sa_scalar(x, p):
        return float(_spatial_attention_fwd(x, p)[0].sum())

    gates, cache = _spatial_attention_fwd(sa_x, sa)
    dx, grads = _spatial_attention_bwd(np.ones_like(gates), cache, sa)
    errs = [_check_tensor(lambda t: sa_scalar(t.array, sa), dx + perturb, sa_x, eps)]
    for name in ("kernel", "bias"):
        errs.append(_check_tensor(
            lambda t, n=name: sa_scalar(sa_x, replace(sa, **{n: t.array})),
            grads[name] + perturb, getattr(sa, name), eps,
        ))
    results.append(("spatial_attention", max(errs)))

    # cbam: C=4, 6x6, reduction 2
    cb = CbamParams.seeded(4, 2, rng)
    cb_x = rng.standard_normal((4, 6, 6))

    def cb_scalar(x, p):
        return float(_cbam_fwd(x, p)[0].sum())

    out, cache = _cbam_fwd(cb_x, cb)
    dx, ch_grads, sp_grads = _cbam_bwd(np.ones_like(out), cache, cb)
    errs = [_check_tensor(lambda t: cb_scalar(t.array, cb), dx + perturb, cb_x, eps)]
    for name in ("w1", "b1", "w2", "b2"):
        errs.append(_check_tensor(
            lambda t, n=name: cb_scalar(cb_x, CbamParams(replace(cb.channel, **{n: t.array}), cb.spatial)),
            ch_grads[name] + perturb, getattr(cb.channel, name), eps,
        ))
    for name in ("kernel", "bias"):
        errs.append(_check_tensor(
            lambda t, n=name: cb_scalar(cb_x, CbamParams(cb.channel, replace(cb.spatial, **{n: t.array}))),
            sp_grads[name] + perturb, getattr(cb.spatial, name), eps,
        ))
    results.append(("cbam", max(errs)))

    # distribute: C=8, 4x4
    dp = DistributionParams.seeded(8, rng)
    f_r = rng.standard_normal((8, 4, 4))
    f_d = rng.standard_normal((8, 4, 4))
    f_s = rng.standard_normal((8, 4, 4))

    def di_scalar(fr, fd, fs, p):
        return float(_distribute_fwd(fr, fd, fs, p)[0][3].sum())

    (out_r, out_d, out_s, fused), cache = _distribute_fwd(f_r, f_d, f_s, dp)
    dr, dd, ds, grads = _distribute_bwd(np.ones_like(fused), cache, dp)
    errs = [
        _check_tensor(lambda t: di_scalar(t.array, f_d, f_s, dp), dr + perturb, f_r, eps),
        _check_tensor(lambda t: di_scalar(f_r, t.array, f_s, dp), dd + perturb, f_d, eps),
        _check_tensor(lambda t: di_scalar(f_r, f_d, t.array, dp), ds + perturb, f_s, eps),
    ]
    for name in ("w_global", "b_global", "w_r", "b_r", "w_d", "b_d", "w_s", "b_s"):
        errs.append(_check_tensor(
            lambda t, n=name: di_scalar(f_r, f_d, f_s, replace(dp, **{n: t.array})),
            grads[name] + perturb, getattr(dp, name), eps,
        ))
    results.append(("distribute", max(errs)))

    return results
