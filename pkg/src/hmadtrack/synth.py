"""Deterministic synthetic RGB-D sequences with exact ground truth.

Renders a textured rectangular or elliptical target moving over a textured
background. Challenge variants: look-alike distractors on a different depth
plane, fast motion, dim lighting with sensor noise (depth untouched), and a
sweeping occluder that hides the target. Everything derives from the spec's
seed; equal specs produce bitwise-equal frames.

On disk a sequence is a directory of frame_%06d.ppm (P6, maxval 255) and
frame_%06d.pgm (P5, maxval 65535) pairs plus groundtruth.txt and spec.txt.
"""

import os
import re
from dataclasses import dataclass, fields

import numpy as np

from .metrics import BBox, read_groundtruth, write_groundtruth
from .tensor import Tensor

CHALLENGES = ("plain", "distractors", "fast_motion", "dim_light", "occlusion")


class SequenceIOError(ValueError):
    """Malformed sequence file; message carries path and byte offset."""


@dataclass
class SequenceSpec:
    challenge: str = "plain"
    length: int = 40
    image_size: tuple = (96, 96)  # (H, W)
    target_size: tuple = (32, 32)  # (h, w) pixels
    target_shape: str = "rect"  # rect | ellipse
    start: tuple | None = None  # target center (cx, cy); image center if None
    velocity: tuple = (1.3, 0.9)  # (vx, vy) pixels per frame
    distractor_count: int = 0
    illumination: float = 1.0
    noise_std: float = 0.02
    depth_contrast: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.challenge not in CHALLENGES:
            raise ValueError(f"challenge must be one of {CHALLENGES}, got {self.challenge!r}")
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if not (0.0 < self.illumination <= 1.0):
            raise ValueError(f"illumination must lie in (0, 1], got {self.illumination}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.distractor_count < 0:
            raise ValueError(f"distractor_count must be >= 0, got {self.distractor_count}")
        if self.target_shape not in ("rect", "ellipse"):
            raise ValueError(f"target_shape must be rect or ellipse, got {self.target_shape!r}")
        h, w = self.image_size
        th, tw = self.target_size
        if th >= h - 2 or tw >= w - 2 or th < 4 or tw < 4:
            raise ValueError(f"target_size {self.target_size} does not fit image_size {self.image_size}")


def default_spec(challenge, seed, length=40, **overrides):
    """Challenge presets; explicit overrides win."""
    presets = {
        "plain": {},
        # look-alikes need room to sit clear of the target
        "distractors": {"distractor_count": 3, "image_size": (128, 128)},
        "fast_motion": {"velocity": (4.2, 2.9)},
        "dim_light": {"illumination": 0.05, "noise_std": 0.05},
        "occlusion": {},
    }
    kw = dict(presets[challenge])
    kw.update(overrides)
    return SequenceSpec(challenge=challenge, seed=seed, length=length, **kw)


@dataclass
class RGBDFrame:
    rgb: Tensor  # [3, H, W] in [0, 1]
    depth: Tensor  # [1, H, W] in [0, 1]

    def __post_init__(self):
        if self.rgb.shape[0] != 3 or self.depth.shape[0] != 1:
            raise ValueError("rgb must be [3,H,W] and depth [1,H,W]")
        if self.rgb.shape[1:] != self.depth.shape[1:]:
            raise ValueError(f"rgb {self.rgb.shape} and depth {self.depth.shape} extents differ")
        for t in (self.rgb, self.depth):
            if t.array.min() < 0.0 or t.array.max() > 1.0:
                raise ValueError("pixel values must lie in [0, 1]")


def _block_texture(rng, channels, h, w, lo, hi, cell=8):
    """Piecewise-constant texture from a coarse seeded grid."""
    gh, gw = (h + cell - 1) // cell, (w + cell - 1) // cell
    coarse = rng.uniform(lo, hi, size=(channels, gh, gw))
    return coarse.repeat(cell, axis=1).repeat(cell, axis=2)[:, :h, :w]


def _bounce(pos, vel, lo, hi):
    """Advance one step with reflection so pos stays inside [lo, hi]."""
    pos += vel
    if pos < lo:
        pos = 2 * lo - pos
        vel = -vel
    if pos > hi:
        pos = 2 * hi - pos
        vel = -vel
    return min(max(pos, lo), hi), vel


class _Mover:
    def __init__(self, cx, cy, vx, vy, half_w, half_h, img_h, img_w):
        self.cx, self.cy, self.vx, self.vy = float(cx), float(cy), float(vx), float(vy)
        self.half_w, self.half_h = half_w, half_h
        self.lo_x, self.hi_x = half_w + 1.0, img_w - half_w - 1.0
        self.lo_y, self.hi_y = half_h + 1.0, img_h - half_h - 1.0

    def step(self):
        self.cx, self.vx = _bounce(self.cx, self.vx, self.lo_x, self.hi_x)
        self.cy, self.vy = _bounce(self.cy, self.vy, self.lo_y, self.hi_y)

    def box(self, w, h):
        """Integer-rounded rendered box (x, y, w, h)."""
        return int(round(self.cx - w / 2.0)), int(round(self.cy - h / 2.0)), w, h


def _object_mask(shape, h, w):
    if shape == "ellipse":
        yy, xx = np.mgrid[0:h, 0:w]
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        return ((yy - cy) / (h / 2.0)) ** 2 + ((xx - cx) / (w / 2.0)) ** 2 <= 1.0
    return np.ones((h, w), dtype=bool)


def _paint(rgb, depth, patch, depth_value, mask, x, y):
    h, w = mask.shape
    rgb[:, y:y + h, x:x + w][:, mask] = patch[:, mask]
    depth[0, y:y + h, x:x + w][mask] = depth_value


def generate_sequence(spec):
    """Render a spec into ([RGBDFrame, ...], [BBox-or-None, ...])."""
    img_h, img_w = spec.image_size
    th, tw = spec.target_size
    rng_tex = np.random.default_rng([spec.seed, 1])
    rng_place = np.random.default_rng([spec.seed, 2])
    rng_noise = np.random.default_rng([spec.seed, 3])

    background = _block_texture(rng_tex, 3, img_h, img_w, 0.25, 0.75, cell=12)
    target_patch = _block_texture(rng_tex, 3, th, tw, 0.10, 0.90, cell=8)
    # occluder bar is wider than the target so full occlusion (gt absent) can occur
    occluder_w = max(16, int(round(1.25 * tw)))
    occluder_patch = _block_texture(rng_tex, 3, img_h, occluder_w, 0.20, 0.60, cell=8)
    target_mask = _object_mask(spec.target_shape, th, tw)

    bg_depth = 0.20 + 0.10 * (np.arange(img_h, dtype=np.float64) / max(1, img_h - 1))
    target_depth = min(0.95, 0.30 + spec.depth_contrast)
    distractor_depth = max(0.05, target_depth - 0.25)
    occluder_depth = min(1.0, target_depth + 0.15)

    start = spec.start or (img_w / 2.0, img_h / 2.0)
    target = _Mover(start[0], start[1], spec.velocity[0], spec.velocity[1],
                    tw / 2.0, th / 2.0, img_h, img_w)

    distractors = []
    if spec.distractor_count:
        # non-overlapping grid sites, keeping clear of the target's start box
        pitch_x, pitch_y = tw + 2, th + 2
        xs = np.arange(tw / 2.0 + 1, img_w - tw / 2.0 - 1 + 1e-9, pitch_x)
        ys = np.arange(th / 2.0 + 1, img_h - th / 2.0 - 1 + 1e-9, pitch_y)
        sites = [(x, y) for y in ys for x in xs
                 if abs(x - target.cx) >= tw or abs(y - target.cy) >= th]
        if len(sites) < spec.distractor_count:
            raise ValueError(
                f"distractor_count {spec.distractor_count} exceeds the {len(sites)} placeable sites"
            )
        order = rng_place.permutation(len(sites))[:spec.distractor_count]
        for idx in order:
            cx, cy = sites[idx]
            angle = rng_place.uniform(0, 2 * np.pi)
            distractors.append(_Mover(cx, cy, 0.7 * np.cos(angle), 0.7 * np.sin(angle),
                                      tw / 2.0, th / 2.0, img_h, img_w))

    # occluder: full-height bar sweeping left to right across the target's path
    occluder_speed = (img_w + 2.0 * occluder_w) / max(1, spec.length - 1)

    frames, gts = [], []
    for t in range(spec.length):
        rgb = background.copy()
        depth = np.broadcast_to(bg_depth[None, :, None], (1, img_h, img_w)).copy()

        for mover in distractors:
            x, y, _, _ = mover.box(tw, th)
            _paint(rgb, depth, target_patch, distractor_depth, target_mask, x, y)

        tx, ty, _, _ = target.box(tw, th)
        _paint(rgb, depth, target_patch, target_depth, target_mask, tx, ty)
        gt = BBox(float(tx), float(ty), float(tw), float(th))

        if spec.challenge == "occlusion":
            ox = int(round(-occluder_w + occluder_speed * t))
            x0, x1 = max(ox, 0), min(ox + occluder_w, img_w)
            if x1 > x0:
                rgb[:, :, x0:x1] = occluder_patch[:, :, x0 - ox:x1 - ox]
                depth[0, :, x0:x1] = occluder_depth
            covered_w = max(0, min(tx + tw, ox + occluder_w) - max(tx, ox))
            if covered_w * th >= 0.8 * tw * th:
                gt = None

        noise = rng_noise.standard_normal(rgb.shape)
        rgb = np.clip(rgb * spec.illumination + noise * spec.noise_std, 0.0, 1.0)

        frames.append(RGBDFrame(rgb=Tensor(rgb), depth=Tensor(np.clip(depth, 0.0, 1.0))))
        gts.append(gt)

        target.step()
        for mover in distractors:
            mover.step()
    return frames, gts


# ---------------------------------------------------------------------------
# binary netpbm encoding


def _encode_ppm(rgb):
    h, w = rgb.shape[1:]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    pixels = np.rint(rgb * 255.0).astype(np.uint8).transpose(1, 2, 0)
    return header + pixels.tobytes()


def _encode_pgm(depth):
    h, w = depth.shape[1:]
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    pixels = np.rint(depth[0] * 65535.0).astype(">u2")
    return header + pixels.tobytes()


def _parse_netpbm(path, expected_magic):
    with open(path, "rb") as fh:
        blob = fh.read()

    def fail(off, msg):
        raise SequenceIOError(f"{path}: byte {off}: {msg}")

    if blob[:2] != expected_magic:
        fail(0, f"expected magic {expected_magic.decode()}, got {blob[:2]!r}")
    off = 2
    tokens = []
    while len(tokens) < 3:
        if off >= len(blob):
            fail(off, "truncated header")
        ch = blob[off:off + 1]
        if ch == b"#":  # comment to end of line
            while off < len(blob) and blob[off:off + 1] != b"\n":
                off += 1
        elif ch.isspace():
            off += 1
        elif ch.isdigit():
            m = re.match(rb"\d+", blob[off:])
            tokens.append(int(m.group()))
            off += m.end()
        else:
            fail(off, f"unexpected header byte {ch!r}")
    if off >= len(blob) or not blob[off:off + 1].isspace():
        fail(off, "missing whitespace after maxval")
    off += 1
    width, height, maxval = tokens
    if width < 1 or height < 1:
        fail(2, f"bad dimensions {width}x{height}")
    return blob, off, width, height, maxval


def read_ppm(path):
    blob, off, w, h, maxval = _parse_netpbm(path, b"P6")
    if maxval != 255:
        raise SequenceIOError(f"{path}: byte 2: unsupported maxval {maxval}")
    need = w * h * 3
    if len(blob) - off != need:
        raise SequenceIOError(f"{path}: byte {off}: expected {need} pixel bytes, found {len(blob) - off}")
    pixels = np.frombuffer(blob, dtype=np.uint8, count=need, offset=off)
    return pixels.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float64) / 255.0


def read_pgm(path):
    blob, off, w, h, maxval = _parse_netpbm(path, b"P5")
    if maxval != 65535:
        raise SequenceIOError(f"{path}: byte 2: unsupported maxval {maxval}")
    need = w * h * 2
    if len(blob) - off != need:
        raise SequenceIOError(f"{path}: byte {off}: expected {need} pixel bytes, found {len(blob) - off}")
    pixels = np.frombuffer(blob, dtype=">u2", count=w * h, offset=off)
    return pixels.reshape(1, h, w).astype(np.float64) / 65535.0


def spec_to_text(spec):
    lines = []
    for f in fields(spec):
        lines.append(f"{f.name}={getattr(spec, f.name)!r}")
    return "\n".join(lines) + "\n"


def write_sequence(frames, gts, directory, spec=None):
    """Write frames, ground truth, and an optional spec echo into a directory."""
    if len(frames) != len(gts):
        raise ValueError(f"frame/ground-truth length mismatch: {len(frames)} vs {len(gts)}")
    os.makedirs(directory, exist_ok=True)
    for i, frame in enumerate(frames):
        with open(os.path.join(directory, f"frame_{i:06d}.ppm"), "wb") as fh:
            fh.write(_encode_ppm(frame.rgb.array))
        with open(os.path.join(directory, f"frame_{i:06d}.pgm"), "wb") as fh:
            fh.write(_encode_pgm(frame.depth.array))
    write_groundtruth(os.path.join(directory, "groundtruth.txt"), gts)
    if spec is not None:
        with open(os.path.join(directory, "spec.txt"), "w") as fh:
            fh.write(spec_to_text(spec))


def read_sequence(directory):
    """Read a sequence directory back into ([RGBDFrame, ...], [BBox-or-None, ...])."""
    names = sorted(n for n in os.listdir(directory) if re.fullmatch(r"frame_\d{6}\.ppm", n))
    if not names:
        raise SequenceIOError(f"{directory}: no frame_*.ppm files found")
    frames = []
    for i, name in enumerate(names):
        expected = f"frame_{i:06d}.ppm"
        if name != expected:
            raise SequenceIOError(f"{directory}: frame {i}: expected {expected}, found {name}")
        rgb = read_ppm(os.path.join(directory, name))
        pgm = os.path.join(directory, f"frame_{i:06d}.pgm")
        if not os.path.exists(pgm):
            raise SequenceIOError(f"{directory}: frame {i}: missing depth file {os.path.basename(pgm)}")
        frames.append(RGBDFrame(rgb=Tensor(rgb), depth=Tensor(read_pgm(pgm))))
    gt_path = os.path.join(directory, "groundtruth.txt")
    if not os.path.exists(gt_path):
        raise SequenceIOError(f"{directory}: missing groundtruth.txt")
    gts = read_groundtruth(gt_path)
    if len(gts) != len(frames):
        raise SequenceIOError(
            f"{gt_path}: {len(gts)} ground-truth lines for {len(frames)} frames"
        )
    return frames, gts
