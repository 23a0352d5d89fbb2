import numpy as np
import pytest

from hmadtrack.synth import (
    RGBDFrame,
    SequenceIOError,
    SequenceSpec,
    default_spec,
    generate_sequence,
    read_pgm,
    read_ppm,
    read_sequence,
    write_sequence,
)
from hmadtrack.tensor import Tensor


def frames_bytes(frames):
    return b"".join(f.rgb.ravel().tobytes() + f.depth.ravel().tobytes() for f in frames)


class TestSpecValidation:
    def test_bad_challenge_named(self):
        with pytest.raises(ValueError, match="challenge"):
            SequenceSpec(challenge="nope")

    def test_bad_length_named(self):
        with pytest.raises(ValueError, match="length"):
            SequenceSpec(length=0)

    def test_bad_illumination_named(self):
        with pytest.raises(ValueError, match="illumination"):
            SequenceSpec(illumination=0.0)
        with pytest.raises(ValueError, match="illumination"):
            SequenceSpec(illumination=1.5)

    def test_bad_target_size_named(self):
        with pytest.raises(ValueError, match="target_size"):
            SequenceSpec(image_size=(48, 48), target_size=(47, 20))


class TestGeneration:
    def test_single_frame_plain_gt_is_initial_box(self):
        spec = default_spec("plain", seed=7, length=1)
        frames, gts = generate_sequence(spec)
        assert len(frames) == 1 and len(gts) == 1
        # default start: image center (48, 48) with a 32x32 target
        assert (gts[0].x, gts[0].y, gts[0].w, gts[0].h) == (32.0, 32.0, 32.0, 32.0)

    def test_dim_light_darkens_rgb_leaves_depth_untouched(self):
        dim = default_spec("dim_light", seed=11, length=5)
        plain = default_spec("plain", seed=11, length=5)
        dim_frames, _ = generate_sequence(dim)
        plain_frames, _ = generate_sequence(plain)
        assert dim.illumination == 0.05
        for df, pf in zip(dim_frames, plain_frames):
            assert df.rgb.array.mean() < 0.1
            assert df.depth.ravel().tobytes() == pf.depth.ravel().tobytes()

    def test_dim_light_variance_collapse(self):
        # scaled texture variance plus the sensor-noise floor bounds the dim variance
        dim = default_spec("dim_light", seed=13, length=4)
        plain = default_spec("plain", seed=13, length=4)
        dim_frames, _ = generate_sequence(dim)
        plain_frames, _ = generate_sequence(plain)
        for df, pf in zip(dim_frames, plain_frames):
            var_dim = df.rgb.array.var()
            var_plain = pf.rgb.array.var()
            assert var_dim <= dim.illumination ** 2 * var_plain + dim.noise_std ** 2 + 1e-4
            assert var_dim < 0.2 * var_plain  # far below plain either way

    def test_distractors_look_alike_in_rgb_but_differ_in_depth(self):
        spec = default_spec("distractors", seed=5, length=1)
        frames, gts = generate_sequence(spec)
        rgb = frames[0].rgb.array
        depth = frames[0].depth.array
        gt = gts[0]
        tx, ty, tw, th = int(gt.x), int(gt.y), int(gt.w), int(gt.h)
        target_rgb = rgb[:, ty:ty + th, tx:tx + tw]
        target_depth = depth[0, ty + th // 2, tx + tw // 2]

        # locate distractor regions by their common depth plane
        distractor_depth_values = np.unique(depth[0])
        planes = [v for v in distractor_depth_values
                  if abs(v - target_depth) >= 0.2 and v > 0.35]
        assert len(planes) == 1
        mask = depth[0] == planes[0]
        from scipy import ndimage  # labelling only used by this test

        labels, count = ndimage.label(mask)
        assert count == 3
        for lab in range(1, count + 1):
            ys, xs = np.nonzero(labels == lab)
            y0, x0 = ys.min(), xs.min()
            patch = rgb[:, y0:y0 + th, x0:x0 + tw]
            if patch.shape != target_rgb.shape:
                continue
            corr = np.corrcoef(patch.ravel(), target_rgb.ravel())[0, 1]
            assert corr > 0.95
            assert abs(planes[0] - target_depth) >= 0.2

    def test_determinism_bitwise(self):
        a = generate_sequence(default_spec("distractors", seed=21, length=6))
        b = generate_sequence(default_spec("distractors", seed=21, length=6))
        assert frames_bytes(a[0]) == frames_bytes(b[0])
        assert a[1] == b[1]

    def test_ground_truth_validity(self):
        for challenge in ("plain", "fast_motion", "occlusion", "distractors"):
            spec = default_spec(challenge, seed=3, length=30)
            frames, gts = generate_sequence(spec)
            h, w = spec.image_size
            for gt in gts:
                if gt is None:
                    assert challenge == "occlusion"
                    continue
                assert gt.w > 0 and gt.h > 0
                assert 0 <= gt.x and gt.x + gt.w <= w
                assert 0 <= gt.y and gt.y + gt.h <= h

    def test_occlusion_produces_absent_frames(self):
        spec = default_spec("occlusion", seed=9, length=30)
        _, gts = generate_sequence(spec)
        assert any(g is None for g in gts)
        assert gts[0] is not None  # target visible at initialization

    def test_static_spec_is_static(self):
        spec = default_spec("plain", seed=1, length=5, velocity=(0.0, 0.0))
        _, gts = generate_sequence(spec)
        assert all(g == gts[0] for g in gts)


class TestSequenceIO:
    def test_round_trip_quantized_bit_exact(self, tmp_path):
        spec = default_spec("plain", seed=2, length=10)
        frames, gts = generate_sequence(spec)
        seq_dir = tmp_path / "seq"
        write_sequence(frames, gts, seq_dir, spec=spec)
        back_frames, back_gts = read_sequence(seq_dir)
        assert back_gts == gts
        for orig, back in zip(frames, back_frames):
            want_rgb = np.rint(orig.rgb.array * 255.0) / 255.0
            want_depth = np.rint(orig.depth.array * 65535.0) / 65535.0
            assert back.rgb.ravel().tobytes() == want_rgb.ravel().tobytes()
            assert back.depth.ravel().tobytes() == want_depth.ravel().tobytes()
        # writing the read-back sequence reproduces identical files
        seq_dir2 = tmp_path / "seq2"
        write_sequence(back_frames, back_gts, seq_dir2, spec=spec)
        for name in ("frame_000000.ppm", "frame_000003.pgm", "groundtruth.txt"):
            assert (seq_dir / name).read_bytes() == (seq_dir2 / name).read_bytes()

    def test_missing_depth_file_names_frame(self, tmp_path):
        frames, gts = generate_sequence(default_spec("plain", seed=2, length=3))
        seq_dir = tmp_path / "seq"
        write_sequence(frames, gts, seq_dir)
        (seq_dir / "frame_000001.pgm").unlink()
        with pytest.raises(SequenceIOError, match="frame 1"):
            read_sequence(seq_dir)

    def test_gt_line_count_must_match(self, tmp_path):
        frames, gts = generate_sequence(default_spec("plain", seed=2, length=3))
        seq_dir = tmp_path / "seq"
        write_sequence(frames, gts, seq_dir)
        (seq_dir / "groundtruth.txt").write_text("1,1,5,5\n")
        with pytest.raises(SequenceIOError, match="3 frames"):
            read_sequence(seq_dir)

    def test_malformed_ppm_reports_byte_offset(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P6\n4 4\n255\n" + b"\x00" * 10)  # too few pixel bytes
        with pytest.raises(SequenceIOError, match="byte"):
            read_ppm(path)
        path.write_bytes(b"PX\n")
        with pytest.raises(SequenceIOError, match="byte 0"):
            read_ppm(path)

    def test_pgm_sixteen_bit_big_endian(self, tmp_path):
        depth = np.array([[[0.0, 1.0], [0.5, 0.25]]])
        frame = RGBDFrame(rgb=Tensor(np.zeros((3, 2, 2))), depth=Tensor(depth))
        seq_dir = tmp_path / "seq"
        write_sequence([frame], [None], seq_dir)
        raw = (seq_dir / "frame_000000.pgm").read_bytes()
        assert raw.startswith(b"P5\n2 2\n65535\n")
        samples = np.frombuffer(raw[-8:], dtype=">u2")
        assert samples.tolist() == [0, 65535, 32768, 16384]
        back = read_pgm(seq_dir / "frame_000000.pgm")
        assert back[0, 0, 1] == 1.0

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(SequenceIOError):
            read_sequence(tmp_path)
