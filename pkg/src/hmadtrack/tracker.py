"""End-to-end tracking loop wiring backbone, fusion, and the online filter."""

from dataclasses import dataclass, fields

from .backbone import DEEP_STRIDE, Backbone, feature_geometry
from .discriminator import (
    SampleMemory,
    TrackState,
    TrainingSample,
    augment_initial,
    init_filter,
    localize,
    predict_score,
    refine_filter,
    update_memory,
)
from .fusion import FusionParams, fuse
from .metrics import BBox, FramePrediction

TRACK_MODES = ("full", "no_distribution", "no_attention", "baseline_add", "rgb_only")


@dataclass
class RunConfig:
    mode: str = "full"
    initial_samples: int = 15  # first-frame augmented set size
    add_threshold: float = 0.6  # confidence needed to admit a sample
    memory_capacity: int = 50
    update_period: int = 20  # frames between refinement passes
    init_refine_iters: int = 30
    update_refine_iters: int = 5
    lam: float = 0.01
    label_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in TRACK_MODES:
            raise ValueError(f"mode must be one of {TRACK_MODES}, got {self.mode!r}")
        for name in ("initial_samples", "memory_capacity", "update_period",
                     "init_refine_iters", "update_refine_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.add_threshold <= 1.0:
            raise ValueError(f"add_threshold must lie in [0,1], got {self.add_threshold}")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


class Tracker:
    """Single-sequence online tracker; init on frame 0, update per later frame."""

    def __init__(self, config, image_size, fusion_params=None):
        self.config = config
        self.backbone = Backbone(seed=config.seed)
        geometry = feature_geometry(image_size)
        if fusion_params is None:
            fusion_params = FusionParams.seeded(geometry, seed=[config.seed, 11])
        elif fusion_params.geometry != geometry:
            raise ValueError(
                f"fusion params geometry {fusion_params.geometry} does not match image {image_size}"
            )
        self.fusion_params = fusion_params
        self.stride = DEEP_STRIDE
        self.model = None
        self.memory = None
        self.state = None

    def _fused(self, frame):
        feats = self.backbone.extract(frame)
        if self.config.mode == "rgb_only":
            return feats.rgb_deep
        return fuse(feats.rgb_deep, feats.depth_deep, feats.rgb_shallow,
                    feats.depth_shallow, self.fusion_params, mode=self.config.mode)

    def _cell_bbox(self, bbox):
        s = float(self.stride)
        return BBox(bbox.x / s, bbox.y / s, bbox.w / s, bbox.h / s)

    def init(self, frame, bbox):
        cfg = self.config
        fused = self._fused(frame)
        cell_bbox = self._cell_bbox(bbox)
        self.model = init_filter(fused, cell_bbox, lam=cfg.lam, label_sigma=cfg.label_sigma)
        initial = augment_initial(fused, cell_bbox, cfg.initial_samples, seed=[cfg.seed, 12])
        self.memory = SampleMemory(
            capacity=cfg.memory_capacity,
            add_threshold=cfg.add_threshold,
            update_period=cfg.update_period,
            samples=initial,
        )
        self.model = refine_filter(self.model, self.memory, cfg.init_refine_iters)
        self.state = TrackState(bbox=bbox, confidence=1.0, frame_index=0)
        return self.state

    def update(self, frame):
        if self.state is None:
            raise RuntimeError("tracker not initialised; call init() with the first frame")
        fused = self._fused(frame)
        score = predict_score(self.model, fused)
        self.state = localize(score, self.state, self.stride)
        cx, cy = self.state.bbox.center
        sample = TrainingSample(
            feature=fused,
            center=(cy / self.stride - 0.5, cx / self.stride - 0.5),
            weight=1.0,
            age=self.state.frame_index,
        )
        update_memory(self.memory, sample, self.state.confidence)
        if self.state.frame_index % self.config.update_period == 0:
            self.model = refine_filter(self.model, self.memory, self.config.update_refine_iters)
        return self.state


def track_sequence(frames, init_bbox, config, fusion_params=None):
    """One FramePrediction per frame; frame 0 echoes the init box at confidence 1."""
    predictions = []
    tracker = None
    for index, frame in enumerate(frames):
        if tracker is None:
            tracker = Tracker(config, frame.rgb.shape[1:], fusion_params=fusion_params)
            tracker.init(frame, init_bbox)
            predictions.append(FramePrediction(bbox=init_bbox, confidence=1.0))
        else:
            state = tracker.update(frame)
            predictions.append(FramePrediction(bbox=state.bbox, confidence=state.confidence))
    if tracker is None:
        raise ValueError("frame source yielded no frames")
    return predictions
