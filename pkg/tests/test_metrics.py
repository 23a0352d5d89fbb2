import numpy as np
import pytest
from oracles import evaluate_oracle, iou_rasterized

from hmadtrack.metrics import (
    BBox,
    EvalReport,
    FramePrediction,
    evaluate_dataset,
    evaluate_sequence,
    f_score,
    overlap,
    precision,
    read_groundtruth,
    read_predictions,
    recall,
    thresholded,
    write_groundtruth,
    write_predictions,
)


def random_case(rng, length):
    """Random (preds, gts) pair plus plain-tuple copies for the oracle."""
    preds, gts, pred_t, gt_t = [], [], [], []
    for _ in range(length):
        if rng.random() < 0.8:
            g = (rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30), rng.uniform(1, 30))
            gts.append(BBox(*g))
            gt_t.append(g)
        else:
            gts.append(None)
            gt_t.append(None)
        if rng.random() < 0.85:
            base = gt_t[-1] or (rng.uniform(0, 50), rng.uniform(0, 50), 10, 10)
            p = (base[0] + rng.normal(0, 5), base[1] + rng.normal(0, 5),
                 max(1.0, base[2] + rng.normal(0, 2)), max(1.0, base[3] + rng.normal(0, 2)))
            conf = rng.random()
            preds.append(FramePrediction(BBox(*p), conf))
            pred_t.append((p, conf))
        else:
            preds.append(FramePrediction(None, 0.0))
            pred_t.append((None, 0.0))
    return preds, gts, pred_t, gt_t


class TestOverlap:
    def test_identical(self):
        b = BBox(3, 4, 10, 12)
        assert overlap(b, b) == 1.0

    def test_disjoint(self):
        assert overlap(BBox(0, 0, 5, 5), BBox(10, 10, 5, 5)) == 0.0

    def test_known_third(self):
        got = overlap(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10))
        assert got == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert float(iou_rasterized((0, 0, 10, 10), (5, 0, 10, 10))) == pytest.approx(got)

    def test_absent(self):
        assert overlap(None, BBox(0, 0, 5, 5)) == 0.0
        assert overlap(BBox(0, 0, 5, 5), None) == 0.0
        assert overlap(None, None) == 0.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = BBox(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 9), rng.uniform(0.1, 9))
            b = BBox(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 9), rng.uniform(0.1, 9))
            assert overlap(a, b) == overlap(b, a)

    def test_matches_rasterization_on_integer_boxes(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a = tuple(int(v) for v in (rng.integers(0, 20), rng.integers(0, 20),
                                       rng.integers(1, 15), rng.integers(1, 15)))
            b = tuple(int(v) for v in (rng.integers(0, 20), rng.integers(0, 20),
                                       rng.integers(1, 15), rng.integers(1, 15)))
            got = overlap(BBox(*a), BBox(*b))
            assert abs(got - float(iou_rasterized(a, b))) < 1e-9

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            BBox(0, 0, 0, 5)


class TestPrecisionRecall:
    def test_perfect(self):
        gts = [BBox(0, 0, 10, 10)] * 4
        preds = [FramePrediction(g, 0.9) for g in gts]
        assert precision(preds, gts, 0.0) == 1.0
        assert recall(preds, gts, 0.0) == 1.0

    def test_absent_prediction_gives_zero_precision(self):
        preds = [FramePrediction(None, 0.0)]
        gts = [BBox(0, 0, 10, 10)]
        assert precision(preds, gts, 0.0) == 0.0

    def test_two_frame_case(self):
        # frame 1: IoU 0.5; frame 2: prediction absent, target visible
        gts = [BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)]
        preds = [
            FramePrediction(BBox(0, 0, 5, 10), 0.8),  # IoU = 50/100 = 0.5
            FramePrediction(None, 0.0),
        ]
        assert precision(preds, gts, 0.0) == pytest.approx(0.5)
        assert recall(preds, gts, 0.0) == pytest.approx(0.25)

    def test_all_absent_ground_truth_recall_vacuous(self):
        preds = [FramePrediction(BBox(0, 0, 5, 5), 0.7)] * 3
        gts = [None] * 3
        assert recall(preds, gts, 0.0) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            precision([FramePrediction(None, 0.0)], [], 0.0)
        with pytest.raises(ValueError):
            recall([], [None], 0.0)

    def test_confidence_threshold_hides_predictions(self):
        pred = FramePrediction(BBox(0, 0, 10, 10), 0.59)
        assert thresholded(pred, 0.6) is None
        assert thresholded(pred, 0.59) is not None


class TestFScore:
    def test_reported_rows(self):
        assert f_score(0.626, 0.597) == pytest.approx(0.611, abs=5e-4)
        assert f_score(0.548, 0.525) == pytest.approx(0.536, abs=5e-4)

    def test_equal_inputs_fixed_point(self):
        for p in (0.0, 0.3, 0.777, 1.0):
            assert f_score(p, p) == p

    def test_zero_sum(self):
        assert f_score(0.0, 0.0) == 0.0

    def test_harmonic_below_arithmetic(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            pr, re = rng.random(), rng.random()
            f = f_score(pr, re)
            assert 0.0 <= f <= 1.0
            assert f <= (pr + re) / 2.0 + 1e-15

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            f_score(1.2, 0.5)


class TestEvaluateSequence:
    def test_perfect_run_at_every_low_threshold(self):
        gts = [BBox(i, i, 8, 8) for i in range(5)]
        preds = [FramePrediction(g, 0.9) for g in gts]
        report = evaluate_sequence(preds, gts, sweep=[0.0, 0.3, 0.6, 0.89])
        assert report.pr == report.re == report.f == 1.0
        for tau, pr, re, f in report.sweep:
            assert pr == re == f == 1.0

    def test_two_frame_f_third(self):
        gts = [BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)]
        preds = [FramePrediction(BBox(0, 0, 5, 10), 0.8), FramePrediction(None, 0.0)]
        report = evaluate_sequence(preds, gts)
        assert report.f == pytest.approx(1.0 / 3.0)
        assert report.n_p == 1 and report.n_g == 2

    def test_threshold_monotonicity_of_np(self):
        rng = np.random.default_rng(3)
        preds, gts, _, _ = random_case(rng, 40)
        taus = np.linspace(0, 1, 21)
        counts = [sum(1 for p in preds if thresholded(p, t) is not None) for t in taus]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_matches_brute_force_oracle_100_sequences(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            preds, gts, pred_t, gt_t = random_case(rng, int(rng.integers(1, 51)))
            report = evaluate_sequence(preds, gts)
            pr, re, f, n_p, n_g = evaluate_oracle(pred_t, gt_t)
            assert abs(report.pr - pr) < 1e-12
            assert abs(report.re - re) < 1e-12
            assert abs(report.f - f) < 1e-12
            assert report.n_p == n_p and report.n_g == n_g

    def test_bounds_fuzz(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            preds, gts, _, _ = random_case(rng, int(rng.integers(1, 30)))
            r = evaluate_sequence(preds, gts)
            assert 0.0 <= r.pr <= 1.0 and 0.0 <= r.re <= 1.0 and 0.0 <= r.f <= 1.0


class TestEvaluateDataset:
    def test_single_sequence_identity(self):
        rng = np.random.default_rng(6)
        preds, gts, _, _ = random_case(rng, 20)
        r = evaluate_sequence(preds, gts)
        d = evaluate_dataset([r])
        assert d.pr == pytest.approx(r.pr) and d.re == pytest.approx(r.re)
        assert d.n_p == r.n_p and d.n_g == r.n_g

    def test_pooled_not_mean_of_ratios(self):
        # sequence A: every frame predicted perfectly (n frames)
        # sequence B: no predictions at all (pr=0 via n_p=0)
        n = 10
        gts = [BBox(0, 0, 10, 10)] * n
        seq_a = evaluate_sequence([FramePrediction(g, 0.9) for g in gts], gts)
        seq_b = evaluate_sequence([FramePrediction(None, 0.0)] * n, gts)
        pooled = evaluate_dataset([seq_a, seq_b])
        # pooled precision = (n*1 + 0)/(n + 0) = 1.0, not the ratio mean 0.5
        assert pooled.pr == pytest.approx(1.0)
        assert pooled.re == pytest.approx(0.5)

    def test_equals_concatenated_evaluation(self):
        rng = np.random.default_rng(7)
        all_preds, all_gts, reports = [], [], []
        for _ in range(5):
            preds, gts, _, _ = random_case(rng, int(rng.integers(5, 30)))
            reports.append(evaluate_sequence(preds, gts))
            all_preds += preds
            all_gts += gts
        pooled = evaluate_dataset(reports)
        concat = evaluate_sequence(all_preds, all_gts)
        assert pooled.pr == pytest.approx(concat.pr, abs=1e-12)
        assert pooled.re == pytest.approx(concat.re, abs=1e-12)
        assert pooled.f == pytest.approx(concat.f, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluate_dataset([])


class TestReportJson:
    def test_fixed_field_names(self):
        import json

        r = EvalReport(pr=0.5, re=0.25, f=1 / 3, n_p=1, n_g=2,
                       sweep=[(0.0, 0.5, 0.25, 1 / 3)])
        d = json.loads(r.to_json())
        assert set(d) == {"pr", "re", "f", "n_p", "n_g", "sweep", "f_max"}
        assert d["sweep"][0] == {"tau": 0.0, "pr": 0.5, "re": 0.25, "f": 1 / 3}
        assert d["f_max"] == pytest.approx(1 / 3)

    def test_absent_prediction_confidence_normalized(self):
        p = FramePrediction(None, 0.7)
        assert p.confidence == 0.0


class TestFileFormats:
    def test_groundtruth_round_trip(self, tmp_path):
        gts = [BBox(1.25, 2.5, 30.0, 40.0), None, BBox(0.1, 0.2, 5.5, 6.25)]
        path = tmp_path / "groundtruth.txt"
        write_groundtruth(path, gts)
        back = read_groundtruth(path)
        assert back == gts

    def test_predictions_round_trip_six_decimals(self, tmp_path):
        preds = [
            FramePrediction(BBox(24.0, 24.0, 32.0, 32.0), 1.0),
            FramePrediction(None, 0.0),
            FramePrediction(BBox(1.123456, 2.5, 3.25, 4.75), 0.654321),
        ]
        path = tmp_path / "pred.txt"
        write_predictions(path, preds)
        lines = path.read_text().splitlines()
        assert lines[0] == "24.000000,24.000000,32.000000,32.000000,1.000000"
        assert lines[1] == ""
        back = read_predictions(path)
        assert back[2].bbox.x == pytest.approx(1.123456)
        assert back[1].bbox is None

    def test_malformed_line_reports_position(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1,2,3\n")
        with pytest.raises(ValueError, match="1"):
            read_groundtruth(path)
        path.write_text("1,2,3,4\n")
        with pytest.raises(ValueError):
            read_predictions(path)
