"""Long-term tracking evaluation: overlap, precision/recall/F-score, report files.

Boxes are axis-aligned (x, y, w, h) in pixels; a missing box (target absent or
not predicted) is represented by None. Precision averages overlap over frames
with a thresholded prediction, recall over frames with a visible target, and
the F-score is their harmonic mean.
"""

import json
from dataclasses import dataclass

__all__ = [
    "BBox", "FramePrediction", "EvalReport",
    "overlap", "precision", "recall", "f_score", "thresholded",
    "evaluate_sequence", "evaluate_dataset",
    "read_groundtruth", "write_groundtruth",
    "read_predictions", "write_predictions",
]


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class FramePrediction:
    bbox: BBox | None
    confidence: float

    def __post_init__(self):
        # an absent prediction carries no confidence
        if self.bbox is None and self.confidence != 0.0:
            object.__setattr__(self, "confidence", 0.0)
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0,1], got {self.confidence}")


def overlap(a, b):
    """Intersection over union of two boxes; 0 when either is absent."""
    if a is None or b is None:
        return 0.0
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


def thresholded(pred, tau):
    """The prediction's box, or None once its confidence falls below tau."""
    if pred.bbox is None or pred.confidence < tau:
        return None
    return pred.bbox


def _check_lengths(preds, gts):
    if len(preds) != len(gts):
        raise ValueError(f"prediction/ground-truth length mismatch: {len(preds)} vs {len(gts)}")


def precision(preds, gts, tau):
    """Mean overlap over frames with a thresholded prediction; 0 if there are none."""
    _check_lengths(preds, gts)
    total, n_p = 0.0, 0
    for pred, gt in zip(preds, gts):
        box = thresholded(pred, tau)
        if box is not None:
            total += overlap(box, gt)
            n_p += 1
    return total / n_p if n_p else 0.0


def recall(preds, gts, tau):
    """Mean overlap over frames with a visible target; vacuously 1 if there are none."""
    _check_lengths(preds, gts)
    total, n_g = 0.0, 0
    for pred, gt in zip(preds, gts):
        if gt is not None:
            total += overlap(thresholded(pred, tau), gt)
            n_g += 1
    return total / n_g if n_g else 1.0


def f_score(pr, re):
    """Harmonic mean 2*pr*re/(pr+re); 0 when both are 0."""
    if not (0.0 <= pr <= 1.0 and 0.0 <= re <= 1.0):
        raise ValueError(f"precision/recall must lie in [0,1], got {pr}, {re}")
    s = pr + re
    return 2.0 * pr * re / s if s > 0.0 else 0.0


@dataclass
class EvalReport:
    pr: float
    re: float
    f: float
    n_p: int
    n_g: int
    sweep: list | None = None  # [(tau, pr, re, f), ...]

    @property
    def f_max(self):
        if not self.sweep:
            return None
        return max(point[3] for point in self.sweep)

    def to_dict(self):
        d = {"pr": self.pr, "re": self.re, "f": self.f, "n_p": self.n_p, "n_g": self.n_g}
        if self.sweep is None:
            d["sweep"] = None
        else:
            d["sweep"] = [
                {"tau": t, "pr": p, "re": r, "f": f} for t, p, r, f in self.sweep
            ]
            d["f_max"] = self.f_max
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def evaluate_sequence(preds, gts, sweep=None):
    """Report at tau=0 plus an optional confidence-threshold sweep."""
    _check_lengths(preds, gts)
    n_p = sum(1 for p in preds if thresholded(p, 0.0) is not None)
    n_g = sum(1 for g in gts if g is not None)
    pr = precision(preds, gts, 0.0)
    re = recall(preds, gts, 0.0)
    curve = None
    if sweep is not None:
        curve = []
        for tau in sweep:
            p_t = precision(preds, gts, tau)
            r_t = recall(preds, gts, tau)
            curve.append((tau, p_t, r_t, f_score(p_t, r_t)))
    return EvalReport(pr=pr, re=re, f=f_score(pr, re), n_p=n_p, n_g=n_g, sweep=curve)


def evaluate_dataset(reports):
    """Pool per-sequence reports frame-weighted (global overlap sums over global counts)."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate an empty set of sequence reports")
    sum_p = sum(r.pr * r.n_p for r in reports)
    sum_g = sum(r.re * r.n_g for r in reports)
    n_p = sum(r.n_p for r in reports)
    n_g = sum(r.n_g for r in reports)
    pr = sum_p / n_p if n_p else 0.0
    re = sum_g / n_g if n_g else 1.0
    return EvalReport(pr=pr, re=re, f=f_score(pr, re), n_p=n_p, n_g=n_g, sweep=None)


# ---------------------------------------------------------------------------
# file formats: one line per frame, empty line for an absent box


def write_groundtruth(path, gts):
    with open(path, "w") as fh:
        for gt in gts:
            if gt is None:
                fh.write("\n")
            else:
                fh.write(f"{gt.x!r},{gt.y!r},{gt.w!r},{gt.h!r}\n")


def read_groundtruth(path):
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                boxes.append(None)
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'x,y,w,h', got {line!r}")
            x, y, w, h = (float(v) for v in parts)
            boxes.append(BBox(x, y, w, h))
    return boxes


def write_predictions(path, preds):
    with open(path, "w") as fh:
        for pred in preds:
            if pred.bbox is None:
                fh.write("\n")
            else:
                b = pred.bbox
                fh.write(f"{b.x:.6f},{b.y:.6f},{b.w:.6f},{b.h:.6f},{pred.confidence:.6f}\n")


def read_predictions(path):
    preds = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                preds.append(FramePrediction(None, 0.0))
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 'x,y,w,h,confidence', got {line!r}")
            x, y, w, h, conf = (float(v) for v in parts)
            preds.append(FramePrediction(BBox(x, y, w, h), conf))
    return preds
