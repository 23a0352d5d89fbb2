"""Online discriminative correlation filter and its bounded sample memory.

The filter is a small [1, C, fh, fw] template initialised from the mean-pooled
target region and refined by exact-line-search steepest descent on a weighted
least-squares objective against Gaussian score labels. The memory keeps at
most `capacity` samples, admits new ones only above a confidence threshold,
and evicts oldest-first.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .metrics import BBox
from .tensor import ShapeError, Tensor, _sigmoid


@dataclass
class FilterModel:
    weights: np.ndarray  # [1, C, fh, fw]
    lam: float = 0.01
    label_sigma: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 4 or self.weights.shape[0] != 1:
            raise ShapeError(f"filter weights must be [1,C,fh,fw], got {self.weights.shape}")
        if self.lam < 0:
            raise ValueError(f"regularisation must be >= 0, got {self.lam}")
        if self.label_sigma <= 0:
            raise ValueError(f"label width must be positive, got {self.label_sigma}")


@dataclass
class TrainingSample:
    feature: Tensor  # fused [C, H, W]
    center: tuple  # (row, col) in feature cells
    weight: float = 1.0
    age: int = 0

    def __post_init__(self):
        _, h, w = self.feature.shape
        r, c = self.center
        if not (0 <= r <= h - 1 and 0 <= c <= w - 1):
            raise ValueError(f"center {self.center} outside {h}x{w} feature map")
        if self.weight <= 0:
            raise ValueError(f"sample weight must be positive, got {self.weight}")


@dataclass
class SampleMemory:
    capacity: int = 50
    add_threshold: float = 0.6
    update_period: int = 20
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if not 0.0 <= self.add_threshold <= 1.0:
            raise ValueError(f"add_threshold must lie in [0,1], got {self.add_threshold}")
        if self.update_period < 1:
            raise ValueError(f"update_period must be >= 1, got {self.update_period}")
        if len(self.samples) > self.capacity:
            raise ValueError(f"{len(self.samples)} initial samples exceed capacity {self.capacity}")

    def __len__(self):
        return len(self.samples)


def update_memory(memory, sample, confidence):
    """Admit a sample if confident enough, evicting the single oldest at capacity."""
    if confidence < memory.add_threshold:
        return memory
    if len(memory.samples) >= memory.capacity:
        oldest = min(range(len(memory.samples)), key=lambda i: memory.samples[i].age)
        del memory.samples[oldest]
    memory.samples.append(sample)
    return memory


@dataclass
class TrackState:
    bbox: BBox
    confidence: float
    frame_index: int

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0,1], got {self.confidence}")


# ---------------------------------------------------------------------------
# filter construction and scoring


def init_filter(fused, target_bbox_cells, lam=0.01, label_sigma=1.0):
    """Mean-pool the target region into a unit-energy correlation template."""
    x = fused.array
    b = target_bbox_cells
    _, fh_map, fw_map = x.shape
    if b.w * b.h < 1.0:
        raise ValueError(f"target region area {b.w * b.h:.3f} is below one feature cell")
    if b.x < 0 or b.y < 0 or b.x + b.w > fw_map or b.y + b.h > fh_map:
        raise ValueError(f"target region {b} outside {fh_map}x{fw_map} feature map")
    r0, r1 = int(math.floor(b.y)), int(math.ceil(b.y + b.h))
    c0, c1 = int(math.floor(b.x)), int(math.ceil(b.x + b.w))
    region = x[:, r0:r1, c0:c1]
    fh = max(1, int(round(b.h)))
    fw = max(1, int(round(b.w)))
    weights = np.empty((1, x.shape[0], fh, fw))
    rh, rw = region.shape[1:]
    for i in range(fh):
        rs, re = i * rh // fh, max(i * rh // fh + 1, (i + 1) * rh // fh)
        for j in range(fw):
            cs, ce = j * rw // fw, max(j * rw // fw + 1, (j + 1) * rw // fw)
            weights[0, :, i, j] = region[:, rs:re, cs:ce].mean(axis=(1, 2))
    energy = np.sqrt((weights ** 2).sum())
    if energy > 0:
        weights /= energy
    return FilterModel(weights=weights, lam=lam, label_sigma=label_sigma)


def _pad_for_filter(x, fh, fw):
    pt, pl = (fh - 1) // 2, (fw - 1) // 2
    return np.pad(x, ((0, 0), (pt, fh - 1 - pt), (pl, fw - 1 - pl)))


def _sample_matrix(x, fh, fw):
    """Correlation operator as a dense [H*W, C*fh*fw] matrix (rows = score cells)."""
    _, h, w = x.shape
    xp = _pad_for_filter(x, fh, fw)
    win = sliding_window_view(xp, (fh, fw), axis=(1, 2))  # [C, H, W, fh, fw]
    return win.transpose(1, 2, 0, 3, 4).reshape(h * w, -1)


def predict_score(model, fused):
    """Dense correlation of the filter with a feature map, zero-padded to [1,H,W]."""
    x = fused.array
    _, c, fh, fw = model.weights.shape
    if x.ndim != 3 or x.shape[0] != c:
        raise ShapeError(f"feature map {fused.shape} does not match filter channels {c}")
    if fh > x.shape[1] or fw > x.shape[2]:
        raise ShapeError(f"filter {fh}x{fw} larger than feature map {x.shape[1]}x{x.shape[2]}")
    score = _sample_matrix(x, fh, fw) @ model.weights.ravel()
    return Tensor(score.reshape(1, x.shape[1], x.shape[2]))


def gaussian_label(shape, center, sigma):
    """Unit-peak Gaussian score target centred at (row, col)."""
    h, w = shape
    rows = np.arange(h)[:, None] - center[0]
    cols = np.arange(w)[None, :] - center[1]
    return np.exp(-(rows ** 2 + cols ** 2) / (2.0 * sigma ** 2))


def objective(model, memory):
    """Weighted squared score error over the memory plus the ridge penalty."""
    f = model.weights.ravel()
    total = model.lam * float(f @ f)
    _, _, fh, fw = model.weights.shape
    for s in memory.samples:
        m = _sample_matrix(s.feature.array, fh, fw)
        y = gaussian_label(s.feature.shape[1:], s.center, model.label_sigma).ravel()
        r = m @ f - y
        total += s.weight * float(r @ r)
    return total


def refine_filter(model, memory, iterations):
    """Steepest descent with the exact quadratic line step; never increases the objective."""
    if not memory.samples:
        raise ValueError("cannot refine against an empty sample memory")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    _, _, fh, fw = model.weights.shape
    mats, labels, wts = [], [], []
    for s in memory.samples:
        mats.append(_sample_matrix(s.feature.array, fh, fw))
        labels.append(gaussian_label(s.feature.shape[1:], s.center, model.label_sigma).ravel())
        wts.append(s.weight)
    f = model.weights.ravel().copy()
    lam = model.lam
    for _ in range(iterations):
        grad = 2.0 * lam * f
        for m, y, w in zip(mats, labels, wts):
            grad += 2.0 * w * (m.T @ (m @ f - y))
        gg = float(grad @ grad)
        if gg < 1e-24:
            break
        denom = lam * gg
        for m, w in zip(mats, wts):
            mg = m @ grad
            denom += w * float(mg @ mg)
        if denom <= 0.0:
            break
        f -= (0.5 * gg / denom) * grad
    return FilterModel(weights=f.reshape(model.weights.shape), lam=model.lam,
                       label_sigma=model.label_sigma)


def localize(score, prev, stride):
    """Argmax cell -> image coordinates; size carried over; confidence squashes the peak."""
    s = score.array
    if s.ndim != 3 or s.shape[0] != 1:
        raise ShapeError(f"score map must be [1,H,W], got {score.shape}")
    flat_idx = int(np.argmax(s[0]))  # first occurrence: smallest row, then column
    row, col = divmod(flat_idx, s.shape[2])
    cx = col * stride + stride / 2.0
    cy = row * stride + stride / 2.0
    b = prev.bbox
    confidence = float(_sigmoid(np.array([s[0, row, col]]))[0])
    return TrackState(
        bbox=BBox(cx - b.w / 2.0, cy - b.h / 2.0, b.w, b.h),
        confidence=confidence,
        frame_index=prev.frame_index + 1,
    )


# ---------------------------------------------------------------------------
# first-frame augmentation


def _shift2d(x, dr, dc):
    out = np.zeros_like(x)
    h, w = x.shape[1:]
    src_r = slice(max(0, -dr), min(h, h - dr))
    dst_r = slice(max(0, dr), min(h, h + dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[:, dst_r, dst_c] = x[:, src_r, src_c]
    return out


def augment_initial(fused, target_bbox_cells, count, seed=0):
    """The original sample plus count-1 distinct shift/flip variants of it.

    Variants combine integer cell shifts within +/-2 and a horizontal flip,
    enumerated in a seed-shuffled deterministic order; shifted centers must
    stay inside the feature map.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    x = fused.array
    _, h, w = x.shape
    b = target_bbox_cells
    center = (b.y + b.h / 2.0 - 0.5, b.x + b.w / 2.0 - 0.5)

    candidates = []
    for flip in (False, True):
        for dr in range(-2, 3):
            for dc in range(-2, 3):
                if not flip and dr == 0 and dc == 0:
                    continue  # the identity transform is the original sample
                col = (w - 1 - center[1]) if flip else center[1]
                r, c = center[0] + dr, col + dc
                if 0 <= r <= h - 1 and 0 <= c <= w - 1:
                    candidates.append((flip, dr, dc, r, c))
    if count - 1 > len(candidates):
        raise ValueError(
            f"count {count} exceeds the {len(candidates) + 1} enumerable variants"
        )
    order = np.random.default_rng(seed).permutation(len(candidates))[:count - 1]

    samples = [TrainingSample(feature=fused, center=center, weight=1.0, age=0)]
    for idx in order:
        flip, dr, dc, r, c = candidates[idx]
        arr = x[:, :, ::-1] if flip else x
        samples.append(TrainingSample(
            feature=Tensor(_shift2d(arr, dr, dc)), center=(r, c), weight=1.0, age=0,
        ))
    return samples
