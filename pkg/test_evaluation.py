import math

import numpy as np
import pytest

from amc_config import load_settings
from amc_errors import ShapeError
from amc_evaluation import (
    REFERENCE_ACCURACY,
    ConfusionMatrix,
    accuracy_frame,
    accuracy_table,
    detection_accuracy,
    run_accuracy_benchmark,
    run_timing_benchmark,
)
from amc_synthesis import SCHEMES

CLASSES = [s.value for s in SCHEMES]


class TestDetectionAccuracy:
    def test_formula(self):
        assert detection_accuracy(1, 1, 0, 0) == 1.0
        assert detection_accuracy(5, 90, 3, 2) == pytest.approx(0.95)

    def test_empty(self):
        with pytest.raises(ShapeError):
            detection_accuracy(0, 0, 0, 0)


class TestConfusionMatrix:
    def test_perfect_classifier_is_identity(self):
        labels = CLASSES * 3
        matrix = ConfusionMatrix.from_predictions(labels, labels, CLASSES)
        np.testing.assert_array_equal(matrix.counts, 3 * np.eye(len(CLASSES), dtype=int))
        np.testing.assert_array_equal(matrix.normalized(), np.eye(len(CLASSES)))
        assert matrix.overall_accuracy() == 1.0
        assert all(matrix.class_accuracy(c) == 1.0 for c in CLASSES)
        assert matrix.off_diagonal() == []

    def test_counts_and_outcomes(self):
        matrix = ConfusionMatrix.from_predictions(
            ["AM", "AM", "FM", "FM"], ["AM", "FM", "FM", "FM"], ["AM", "FM", "DSB"]
        )
        np.testing.assert_array_equal(matrix.counts, [[1, 1, 0], [0, 2, 0], [0, 0, 0]])
        np.testing.assert_array_equal(matrix.row_sums(), [2, 2, 0])
        assert matrix.row_sums().sum() == matrix.total == 4
        assert matrix.outcomes("AM") == (1, 2, 0, 1)
        assert matrix.class_accuracy("AM") == pytest.approx(0.75)
        assert matrix.overall_accuracy() == pytest.approx(0.75)
        np.testing.assert_allclose(matrix.normalized()[2], 0.0)
        assert matrix.off_diagonal() == [("AM", "FM", 0.5)]
        assert "0.50" in matrix.table()

    def test_frame_labels(self):
        matrix = ConfusionMatrix.from_predictions(["AM"], ["FM"], ["AM", "FM"])
        frame = matrix.to_frame()
        assert frame.loc["AM", "FM"] == 1
        assert list(frame.columns) == ["AM", "FM"]


class TestAccuracyFrame:
    def test_columns_and_overall_row(self):
        perfect = ConfusionMatrix.from_predictions(CLASSES, CLASSES, CLASSES)
        shifted = ConfusionMatrix.from_predictions(CLASSES, CLASSES[1:] + CLASSES[:1], CLASSES)
        frame = accuracy_frame({15.0: perfect, 5.0: shifted})
        assert list(frame.columns) == ["class", "5 dB", "15 dB", "reference"]
        assert list(frame["class"]) == CLASSES + ["overall"]
        assert frame["15 dB"].iloc[-1] == 100.0
        assert frame["5 dB"].iloc[-1] == 0.0
        usb = frame[frame["class"] == "USB"].iloc[0]
        assert math.isnan(usb["reference"])
        assert frame[frame["class"] == "FM"].iloc[0]["reference"] == REFERENCE_ACCURACY["FM"]
        assert "n/a" in accuracy_table(frame)


class TestBenchmarks:
    def test_small_accuracy_run(self):
        settings = load_settings(
            overrides={"train_count": 4, "test_count": 2, "snr_list": "25", "num_samples": 1024}
        )
        run = run_accuracy_benchmark(settings, progress=False)
        matrix = run.matrices[25.0]
        assert matrix.total == 2 * len(CLASSES)
        np.testing.assert_array_equal(matrix.row_sums(), np.full(len(CLASSES), 2))
        assert len(run.models[25.0].binary_models) == 55
        assert not set(run.train_seeds[25.0]) & set(run.test_seeds[25.0])

    def test_small_timing_run(self, tmp_path):
        frame = run_timing_benchmark([200, 500], queries=50, warmup=5, workdir=str(tmp_path), progress=False)
        assert list(frame["known_signals"]) == [200, 500]
        assert list(frame.columns) == [
            "known_signals",
            "queries",
            "hits",
            "match_mean_ns",
            "match_median_ns",
            "scan_mean_ns",
            "scan_median_ns",
            "ratio",
        ]
        assert np.all(frame["hits"] >= 25)
        assert np.all(frame["match_mean_ns"] > 0)
        assert (frame[["match_median_ns", "scan_median_ns"]].dtypes == np.float64).all()
        assert np.all(frame["scan_median_ns"] > 0)
        assert list(tmp_path.iterdir()) == []

    @pytest.mark.slow
    def test_full_accuracy_run(self):
        run = run_accuracy_benchmark(load_settings(), progress=False)
        assert sorted(run.matrices) == [5.0, 15.0, 25.0]
        for matrix in run.matrices.values():
            assert matrix.total == 100 * len(CLASSES)
        assert run.matrices[25.0].overall_accuracy() > 0.5
        assert run.matrices[15.0].overall_accuracy() >= 0.97
        assert run.matrices[5.0].overall_accuracy() >= 0.90

        confusable = [{"LSB", "USB"}, {"AM", "DSB"}]
        for true, predicted, share in run.matrices[15.0].off_diagonal():
            assert share <= 0.03, (true, predicted, share)
            if share >= 0.01:
                assert {true, predicted} in confusable, (true, predicted, share)

    @pytest.mark.slow
    def test_index_beats_scan_at_100k(self):
        frame = run_timing_benchmark([1_000, 10_000, 100_000], queries=1000, progress=False)
        assert frame["ratio"].iloc[-1] <= 0.1
        scan = frame["scan_mean_ns"].tolist()
        assert scan == sorted(scan)
