"""Confusion matrices, accuracy tables and the two benchmark experiments."""

import logging
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix
from tabulate import tabulate
from tqdm import tqdm

from amc_config import Settings
from amc_errors import ShapeError
from amc_featstore import FeatureRecord, FeatureStore, FlatFileStore, MatchPolicy, match, persist, scan_match
from amc_features import NUM_FEATURES, extract_batch
from amc_io import dataset_from_pairs
from amc_svm import KernelSpec, MulticlassModel, predict_many, train_multiclass
from amc_synthesis import SCHEMES, realize_batch

logger = logging.getLogger(__name__)

# Correct detection rate (%) of the feed-forward neural network reference
# classifier; USB and 4FSK were not reported.
REFERENCE_ACCURACY = {
    "2ASK": 99.99,
    "4ASK": 99.98,
    "2FSK": 99.92,
    "2PSK": 99.75,
    "4PSK": 99.98,
    "AM": 99.95,
    "DSB": 99.98,
    "FM": 99.91,
    "LSB": 99.97,
}

# test realizations draw seeds from a range disjoint from training
TEST_SEED_OFFSET = 1_000_000


def detection_accuracy(tp: int, tn: int, fp: int, fn: int) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    total = tp + tn + fp + fn
    if total == 0:
        raise ShapeError("accuracy of an empty confusion matrix")
    return (tp + tn) / total


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    class_list: Tuple[str, ...]
    counts: np.ndarray

    @classmethod
    def from_predictions(
        cls, y_true: Sequence[str], y_pred: Sequence[str], class_list: Sequence[str]
    ) -> "ConfusionMatrix":
        labels = [str(c) for c in class_list]
        counts = confusion_matrix([str(y) for y in y_true], [str(y) for y in y_pred], labels=labels)
        return cls(tuple(labels), counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def outcomes(self, label: str) -> Tuple[int, int, int, int]:
        """(TP, TN, FP, FN) for one class."""
        i = self.class_list.index(label)
        tp = int(self.counts[i, i])
        fn = int(self.counts[i].sum()) - tp
        fp = int(self.counts[:, i].sum()) - tp
        tn = self.total - tp - fn - fp
        return tp, tn, fp, fn

    def class_accuracy(self, label: str) -> float:
        return detection_accuracy(*self.outcomes(label))

    def overall_accuracy(self) -> float:
        if self.total == 0:
            raise ShapeError("accuracy of an empty confusion matrix")
        return float(np.trace(self.counts)) / self.total

    def normalized(self) -> np.ndarray:
        sums = self.row_sums()[:, np.newaxis].astype(np.float64)
        return np.divide(self.counts, sums, out=np.zeros(self.counts.shape), where=sums > 0)

    def off_diagonal(self, minimum: float = 0.0) -> List[Tuple[str, str, float]]:
        """Row-normalized off-diagonal cells above ``minimum``."""
        norm = self.normalized()
        cells = []
        for i, true in enumerate(self.class_list):
            for j, predicted in enumerate(self.class_list):
                if i != j and norm[i, j] > minimum:
                    cells.append((true, predicted, float(norm[i, j])))
        return cells

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.counts, index=list(self.class_list), columns=list(self.class_list))

    def table(self) -> str:
        rows = [[label] + [f"{v:.2f}" for v in row] for label, row in zip(self.class_list, self.normalized())]
        return tabulate(rows, headers=["true \\ predicted"] + list(self.class_list), tablefmt="grid")


def accuracy_frame(matrices: Dict[float, ConfusionMatrix]) -> pd.DataFrame:
    """Per-class accuracy (%) per SNR with the reference column, plus an overall row."""
    snrs = sorted(matrices)
    class_list = matrices[snrs[0]].class_list
    rows = []
    for label in class_list:
        row = {"class": label}
        for snr in snrs:
            row[f"{snr:g} dB"] = 100.0 * matrices[snr].class_accuracy(label)
        row["reference"] = REFERENCE_ACCURACY.get(label)
        rows.append(row)
    overall = {"class": "overall"}
    for snr in snrs:
        overall[f"{snr:g} dB"] = 100.0 * matrices[snr].overall_accuracy()
    overall["reference"] = None
    rows.append(overall)
    return pd.DataFrame(rows)


def accuracy_table(frame: pd.DataFrame) -> str:
    table = frame.astype(object).where(frame.notna(), "n/a")
    return tabulate(table.values.tolist(), headers=list(frame.columns), tablefmt="grid", floatfmt=".2f")


@dataclass
class AccuracyRun:
    matrices: Dict[float, ConfusionMatrix]
    models: Dict[float, MulticlassModel]
    train_seeds: Dict[float, List[int]]
    test_seeds: Dict[float, List[int]]


def run_accuracy_benchmark(settings: Settings, progress: bool = True) -> AccuracyRun:
    """Train and test a multiclass model per SNR on fresh realizations."""
    synth = settings.synth
    experiment = settings.experiment
    kernel = KernelSpec(settings.svm.kernel_degree, settings.svm.kernel_offset)
    class_list = [s.value for s in SCHEMES]
    run = AccuracyRun({}, {}, {}, {})

    for snr in experiment.snr_list:
        logger.info(f"Accuracy benchmark at {snr:g} dB")
        train_base = synth.rng_seed
        test_base = synth.rng_seed + TEST_SEED_OFFSET
        train = realize_batch(SCHEMES, [snr], experiment.train_count, synth, train_base, progress)
        test = realize_batch(SCHEMES, [snr], experiment.test_count, synth, test_base, progress)

        train_ds = dataset_from_pairs(extract_batch(train, settings.features, progress))
        test_ds = dataset_from_pairs(extract_batch(test, settings.features, progress))
        model = train_multiclass(
            train_ds,
            settings.svm.c,
            kernel,
            settings.svm.tol,
            settings.svm.max_passes,
            seed=train_base,
            progress=progress,
        )
        predicted = predict_many(model, test_ds.features)
        matrix = ConfusionMatrix.from_predictions(test_ds.labels, predicted, class_list)
        logger.info(f"Overall accuracy at {snr:g} dB: {matrix.overall_accuracy():.4f}")

        run.matrices[snr] = matrix
        run.models[snr] = model
        run.train_seeds[snr] = [w.seed for w in train]
        run.test_seeds[snr] = [w.seed for w in test]
    return run


def _latencies(lookup, store, queries: np.ndarray, policy: MatchPolicy, warmup: int) -> List[int]:
    for x in queries[:warmup]:
        lookup(store, x, policy)
    elapsed = []
    for x in queries:
        start = time.perf_counter_ns()
        lookup(store, x, policy)
        elapsed.append(time.perf_counter_ns() - start)
    return elapsed


def timing_queries(records: np.ndarray, count: int, eps: np.ndarray, rng) -> np.ndarray:
    """Alternate near-record queries (hits) with uniform random ones (mostly misses)."""
    queries = rng.random((count, NUM_FEATURES))
    picks = rng.integers(0, records.shape[0], size=count)
    jitter = rng.uniform(-0.5, 0.5, size=(count, NUM_FEATURES)) * eps
    near = records[picks] + jitter
    queries[::2] = near[::2]
    return queries


def run_timing_benchmark(
    counts: Sequence[int],
    queries: int = 1000,
    tolerance: float = 0.05,
    seed: int = 0,
    warmup: int = 50,
    workdir: Optional[str] = None,
    progress: bool = True,
) -> pd.DataFrame:
    """Indexed match vs flat-file scan latency for growing known-signal counts.

    Features are uniform on [0, 1)^9; every store uses the same tolerance
    on each feature.
    """
    rng = np.random.default_rng(seed)
    eps = np.full(NUM_FEATURES, tolerance)
    policy = MatchPolicy(tolerances=eps)
    labels = [s.value for s in SCHEMES]
    rows = []

    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        for count in tqdm(list(counts), desc="Timing", disable=not progress):
            features = rng.random((count, NUM_FEATURES))
            records = [
                FeatureRecord.create(labels[i % len(labels)], features[i], created_at=0.0)
                for i in range(count)
            ]
            store = FeatureStore(eps)
            store.insert_many(records)
            flat_path = os.path.join(tmp, f"flat_{count}.amcdb")
            persist(store, flat_path)
            flat = FlatFileStore.open(flat_path)

            probe = timing_queries(features, queries, eps, rng)
            indexed = _latencies(match, store, probe, policy, warmup)
            scanned = _latencies(scan_match, flat, probe, policy, warmup)
            hits = sum(match(store, x, policy) is not None for x in probe)
            store.close()

            rows.append(
                {
                    "known_signals": count,
                    "queries": queries,
                    "hits": hits,
                    "match_mean_ns": float(np.mean(indexed)),
                    "match_median_ns": float(np.median(indexed)),
                    "scan_mean_ns": float(np.mean(scanned)),
                    "scan_median_ns": float(np.median(scanned)),
                }
            )
            logger.info(
                f"{count} known signals: match {rows[-1]['match_mean_ns'] / 1e3:.1f} us, "
                f"scan {rows[-1]['scan_mean_ns'] / 1e3:.1f} us (mean)"
            )

    frame = pd.DataFrame(rows)
    frame["ratio"] = frame["match_mean_ns"] / frame["scan_mean_ns"]
    return frame
