"""SMO-trained support vector machines and one-vs-one multiclass voting.

Binary models are trained with Platt's sequential minimal optimization on
a polynomial kernel. The kernel matrix is never materialized: kernel rows
are computed on demand and the solver keeps only the multipliers and an
error array, both linear in the training set size.

Decision values follow f(x) = sum_k lambda_k K(x, x_k) + b with signed
weights lambda_k = y_k * alpha_k.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_array
from tqdm import tqdm

from amc_errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateLabelsError,
    DimensionMismatchError,
    FormatError,
    InsufficientClassDataError,
    NonFiniteInputError,
    NumericConsistencyError,
    ShapeError,
)
from amc_synthesis import SCHEMES

logger = logging.getLogger(__name__)

MODEL_VERSION = "AMCSVM1"
DEFAULT_PAIR = ("+1", "-1")
STEP_EPS = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Polynomial kernel (x . y + offset) ** degree."""

    degree: int = 1
    offset: float = 0.0
    kind: str = "polynomial"

    def __post_init__(self):
        if self.kind != "polynomial":
            raise ConfigurationError("kernel kind is polynomial", f"kind={self.kind}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ConfigurationError("kernel degree d >= 1", f"d={self.degree}")
        if not self.offset >= 0:
            raise ConfigurationError("kernel offset c0 >= 0", f"c0={self.offset}")

    def rows(self, X: np.ndarray, x: np.ndarray) -> np.ndarray:
        """K(X[i], x) for every row of X."""
        return (X @ x + self.offset) ** int(self.degree)

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return (A @ B.T + self.offset) ** int(self.degree)


def kernel_eval(k: KernelSpec, x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    return float((np.dot(x, y) + k.offset) ** int(k.degree))


@dataclass(frozen=True, eq=False)
class BinarySvmModel:
    support_vectors: np.ndarray
    weights: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    class_pair: Tuple[str, str] = DEFAULT_PAIR
    tol: float = 1e-3
    # training-set indices of the support vectors; empty after a model file load
    support_indices: Tuple[int, ...] = ()
    passes: int = 0
    objective_trace: Tuple[float, ...] = ()

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.support_vectors.shape[1]

    def decision(self, X: np.ndarray) -> np.ndarray:
        """Decision values for a 2-D array of rows."""
        if self.m == 0:
            return np.full(X.shape[0], self.bias)
        return self.kernel.matrix(X, self.support_vectors) @ self.weights + self.bias


def _as_rows(rows, name: str = "rows") -> np.ndarray:
    try:
        return check_array(rows, dtype=np.float64)
    except ValueError as e:
        if "NaN" in str(e) or "infinity" in str(e):
            raise NonFiniteInputError(f"{name}: {str(e)}") from e
        raise ShapeError(f"{name}: {str(e)}") from e


def dual_objective(
    alphas: np.ndarray, X: np.ndarray, y: np.ndarray, kernel: KernelSpec
) -> float:
    """W(alpha) = sum(alpha) - 1/2 sum_ij y_i y_j alpha_i alpha_j K_ij, row by row."""
    lam = y * alphas
    quad = 0.0
    for i in np.flatnonzero(lam):
        quad += lam[i] * float(kernel.rows(X, X[i]) @ lam)
    return float(np.sum(alphas) - 0.5 * quad)


def _kkt_residuals(alphas: np.ndarray, y: np.ndarray, errors: np.ndarray, c: float) -> np.ndarray:
    r = y * errors  # y f(x) - 1
    residual = np.where(alphas <= 0, np.maximum(0.0, -r), np.abs(r))
    return np.where(alphas >= c, np.maximum(0.0, r), residual)


class _SmoSolver:
    """Platt's SMO with full/non-bound pass alternation and an error array."""

    def __init__(self, X, y, c, kernel, tol, max_passes, debug):
        self.X = X
        self.y = y
        self.c = c
        self.kernel = kernel
        self.tol = tol
        self.max_passes = max_passes
        self.debug = debug
        n = X.shape[0]
        self.alphas = np.zeros(n)
        self.b = 0.0
        self.errors = -y.astype(np.float64)
        self.passes = 0
        self.steps = 0
        self.trace: List[float] = []

    def _objective(self) -> float:
        v = self.errors + self.y - self.b
        return float(np.sum(self.alphas) - 0.5 * np.sum(self.y * self.alphas * v))

    def _snap(self, alpha: float) -> float:
        if alpha < 1e-12 * self.c:
            return 0.0
        if alpha > self.c * (1 - 1e-12):
            return self.c
        return alpha

    def _non_bound(self) -> np.ndarray:
        return np.flatnonzero((self.alphas > 0) & (self.alphas < self.c))

    def take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        c = self.c
        a1, a2 = self.alphas[i1], self.alphas[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if y1 != y2:
            low, high = max(0.0, a2 - a1), min(c, c + a2 - a1)
        else:
            low, high = max(0.0, a1 + a2 - c), min(c, a1 + a2)
        if low >= high:
            return False

        row1 = self.kernel.rows(self.X, self.X[i1])
        row2 = self.kernel.rows(self.X, self.X[i2])
        k11, k22, k12 = row1[i1], row2[i2], row1[i2]
        eta = k11 + k22 - 2.0 * k12
        slope = y2 * (e1 - e2)

        if eta > 0:
            a2_new = min(max(a2 + slope / eta, low), high)
        else:
            # objective gain along the constraint line at each end
            gain_low = slope * (low - a2) - 0.5 * eta * (low - a2) ** 2
            gain_high = slope * (high - a2) - 0.5 * eta * (high - a2) ** 2
            if gain_low > gain_high + STEP_EPS:
                a2_new = low
            elif gain_low < gain_high - STEP_EPS:
                a2_new = high
            else:
                a2_new = a2

        if abs(a2_new - a2) < STEP_EPS * (a2_new + a2 + STEP_EPS):
            return False

        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < 0:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > c:
            a2_new += s * (a1_new - c)
            a1_new = c
        a1_new, a2_new = self._snap(a1_new), self._snap(a2_new)

        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - e1 - d1 * k11 - d2 * k12
        b2 = self.b - e2 - d1 * k12 - d2 * k22
        if 0 < a1_new < c:
            b_new = b1
        elif 0 < a2_new < c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.errors += d1 * row1 + d2 * row2 + (b_new - self.b)
        self.alphas[i1] = a1_new
        self.alphas[i2] = a2_new
        self.b = b_new
        self.steps += 1

        if self.debug:
            objective = self._objective()
            if self.trace and objective < self.trace[-1] - 1e-9 * max(1.0, abs(objective)):
                raise NumericConsistencyError(
                    f"dual objective decreased from {self.trace[-1]!r} to {objective!r} at step {self.steps}"
                )
            self.trace.append(objective)
        return True

    def examine(self, i2: int) -> int:
        y2, a2, e2 = self.y[i2], self.alphas[i2], self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.c) or (r2 > self.tol and a2 > 0)):
            return 0

        non_bound = self._non_bound()
        if non_bound.size > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.errors[non_bound] - e2))])
            if self.take_step(i1, i2):
                return 1

        n = self.X.shape[0]
        if non_bound.size:
            start = int(np.searchsorted(non_bound, i2 + 1)) % non_bound.size
            for i1 in np.roll(non_bound, -start):
                if self.take_step(int(i1), i2):
                    return 1
        for offset in range(1, n):
            if self.take_step((i2 + offset) % n, i2):
                return 1
        return 0

    def _outer_loop(self):
        changed = 0
        examine_all = True
        while changed > 0 or examine_all:
            if self.passes >= self.max_passes:
                raise ConvergenceError(self.passes, self.worst_violation())
            self.passes += 1
            indices = range(self.X.shape[0]) if examine_all else self._non_bound()
            changed = sum(self.examine(int(i)) for i in indices)
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True

    def refresh_errors(self):
        """Recompute the error array from scratch to shed accumulated drift."""
        f = np.full(self.X.shape[0], self.b)
        lam = self.y * self.alphas
        for i in np.flatnonzero(lam):
            f += lam[i] * self.kernel.rows(self.X, self.X[i])
        self.errors = f - self.y

    def worst_violation(self) -> float:
        residuals = _kkt_residuals(self.alphas, self.y, self.errors, self.c)
        return float(np.max(residuals)) if residuals.size else 0.0

    def solve(self):
        self._outer_loop()
        self.refresh_errors()
        if self.worst_violation() > self.tol:
            logger.debug("Residual KKT violations after drift refresh, running another full pass")
            self._outer_loop()
            self.refresh_errors()
        worst = self.worst_violation()
        if worst > self.tol:
            logger.warning(f"SMO stopped with KKT violation {worst:.3e} above tol {self.tol}")
        logger.debug(
            f"SMO finished: {self.passes} passes, {self.steps} steps, "
            f"{int(np.count_nonzero(self.alphas))} support vectors, worst violation {worst:.3e}"
        )


def train_binary(
    rows,
    labels,
    C: float = 1.0,
    kernel: KernelSpec = KernelSpec(),
    tol: float = 1e-3,
    max_passes: int = 10_000,
    class_pair: Tuple[str, str] = DEFAULT_PAIR,
    debug: bool = False,
) -> BinarySvmModel:
    """Train a soft-margin SVM on +1/-1 labels by SMO.

    ``class_pair[0]`` names the +1 class. With ``debug`` the dual objective
    is recorded after every accepted step and checked for monotonicity.
    """
    X = _as_rows(rows)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ShapeError("binary labels must be +1 or -1")
    if np.all(y == y[0]):
        raise DegenerateLabelsError(f"only label {int(y[0]):+d} present in {y.shape[0]} rows")
    if not C > 0:
        raise ConfigurationError("C > 0", f"C={C}")
    if not tol > 0:
        raise ConfigurationError("tol > 0", f"tol={tol}")

    solver = _SmoSolver(X, y, float(C), kernel, float(tol), int(max_passes), debug)
    solver.solve()

    support = np.flatnonzero(solver.alphas > 0)
    weights = y[support] * solver.alphas[support]
    balance = float(np.sum(weights))
    if abs(balance) > 1e-6 * max(1.0, C):
        logger.warning(f"Equality constraint off by {balance:.3e} for pair {class_pair}")
    return BinarySvmModel(
        support_vectors=X[support].copy(),
        weights=weights,
        bias=float(solver.b),
        kernel=kernel,
        c=float(C),
        class_pair=tuple(class_pair),
        tol=float(tol),
        support_indices=tuple(int(i) for i in support),
        passes=solver.passes,
        objective_trace=tuple(solver.trace),
    )


def predict_binary(model: BinarySvmModel, x: Sequence[float]) -> float:
    """Decision value f(x) of a binary model."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dimension,):
        raise DimensionMismatchError(f"expected {model.dimension} features, got shape {x.shape}")
    return float(model.decision(x[np.newaxis, :])[0])


def binary_label(model: BinarySvmModel, value: float) -> str:
    """Class for a decision value; zero goes to the first class of the pair."""
    return model.class_pair[0] if value >= 0 else model.class_pair[1]


@dataclass(frozen=True, eq=False)
class KktReport:
    residuals: np.ndarray
    max_residual: float
    equality_violation: float
    bound_violation: float

    def satisfied(self, tol: float) -> bool:
        return (
            self.max_residual <= tol
            and self.equality_violation <= 1e-6
            and self.bound_violation == 0.0
        )


def kkt_report(
    model: BinarySvmModel, rows, labels, alphas: Optional[np.ndarray] = None
) -> KktReport:
    """Per-point KKT residuals of ``model`` on its training data.

    Multipliers are rebuilt from the model's support indices unless
    ``alphas`` is given.
    """
    X = _as_rows(rows)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if alphas is None:
        if model.m and len(model.support_indices) != model.m:
            raise ShapeError("model carries no support indices; pass alphas explicitly")
        alphas = np.zeros(X.shape[0])
        alphas[list(model.support_indices)] = np.abs(model.weights)
        lam = model.weights
    else:
        alphas = np.asarray(alphas, dtype=np.float64)
        lam = y * alphas
    errors = model.decision(X) - y
    residuals = _kkt_residuals(alphas, y, errors, model.c)
    bound = float(np.max(np.maximum(0.0, np.maximum(-alphas, alphas - model.c)), initial=0.0))
    return KktReport(
        residuals=residuals,
        max_residual=float(np.max(residuals, initial=0.0)),
        equality_violation=abs(float(np.sum(lam))),
        bound_violation=bound,
    )


class SmoClassifier(ClassifierMixin, BaseEstimator):
    """Binary SMO SVM with the scikit-learn estimator interface.

    Parameters
    ----------
    C : float, optional (default: 1)
        Box constraint on the multipliers.

    degree, offset : polynomial kernel (x . y + offset) ** degree

    tol : float, optional (default: 1e-3)
        KKT tolerance.

    max_passes : int, optional (default: 10000)
        Outer-loop passes before a ConvergenceError.
    """

    def __init__(self, C=1.0, degree=1, offset=0.0, tol=1e-3, max_passes=10_000, debug=False):
        self.C = C
        self.degree = degree
        self.offset = offset
        self.tol = tol
        self.max_passes = max_passes
        self.debug = debug

    def fit(self, X, y):
        X = _as_rows(X)
        y = np.asarray(y).ravel()
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise DegenerateLabelsError(f"expected 2 classes, got {self.classes_.size}")
        # larger label is the +1 class
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        self.model_ = train_binary(
            X,
            signs,
            self.C,
            KernelSpec(self.degree, self.offset),
            self.tol,
            self.max_passes,
            debug=self.debug,
        )
        self.support_ = np.asarray(self.model_.support_indices)
        self.dual_coef_ = self.model_.weights
        self.intercept_ = self.model_.bias
        return self

    def decision_function(self, X):
        return self.model_.decision(_as_rows(X))

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, self.classes_[1], self.classes_[0])


@dataclass(frozen=True, eq=False)
class Normalization:
    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = self.maximum - self.minimum
        constant = span <= 0
        scaled = (x - self.minimum) / np.where(constant, 1.0, span)
        scaled = np.where(constant, 0.5, scaled)
        return np.clip(scaled, 0.0, 1.0)


def normalize_fit(features) -> Normalization:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ShapeError("cannot fit normalization on an empty dataset")
    return Normalization(X.min(axis=0), X.max(axis=0))


def normalize_apply(norm: Normalization, x) -> np.ndarray:
    return norm.apply(x)


def canonical_classes(labels) -> Tuple[str, ...]:
    """Scheme labels in canonical order, then any other labels sorted."""
    present = set(str(label) for label in labels)
    known = [s.value for s in SCHEMES if s.value in present]
    return tuple(known + sorted(present - set(known)))


@dataclass(eq=False)
class LabeledDataset:
    """Feature rows with labels and, optionally, their SNR and seed."""

    features: np.ndarray
    labels: List[str]
    snr_db: Optional[np.ndarray] = None
    seeds: Optional[List[Optional[int]]] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = [str(label) for label in self.labels]
        if self.features.ndim != 2 or self.features.shape[0] != len(self.labels):
            raise ShapeError(
                f"features of shape {self.features.shape} do not match {len(self.labels)} labels"
            )
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteInputError("dataset contains non-finite feature values")
        n = len(self.labels)
        if self.snr_db is None:
            self.snr_db = np.full(n, math.inf)
        if self.seeds is None:
            self.seeds = [None] * n
        if len(self.snr_db) != n or len(self.seeds) != n:
            raise ShapeError("dataset columns have different lengths")

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> Dict[str, int]:
        return dict(Counter(self.labels))

    def subset(self, mask) -> "LabeledDataset":
        mask = np.asarray(mask, dtype=bool)
        return LabeledDataset(
            self.features[mask],
            [label for label, keep in zip(self.labels, mask) if keep],
            np.asarray(self.snr_db)[mask],
            [seed for seed, keep in zip(self.seeds, mask) if keep],
        )


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    class_list: Tuple[str, ...]
    normalization: Normalization
    binary_models: Tuple[BinarySvmModel, ...]
    kernel: KernelSpec
    c: float
    tol: float
    seed: Optional[int] = None

    @property
    def pairs(self) -> List[Tuple[str, str]]:
        return [model.class_pair for model in self.binary_models]


@dataclass(frozen=True)
class Prediction:
    label: str
    votes: Dict[str, int] = field(default_factory=dict)
    margin_sums: Dict[str, float] = field(default_factory=dict)


def train_multiclass(
    ds: LabeledDataset,
    C: float = 1.0,
    kernel: KernelSpec = KernelSpec(),
    tol: float = 1e-3,
    max_passes: int = 10_000,
    seed: Optional[int] = None,
    progress: bool = True,
) -> MulticlassModel:
    """One binary SMO model per class pair, trained on min-max normalized rows."""
    counts = ds.class_counts()
    classes = canonical_classes(ds.labels)
    if len(classes) < 2:
        only = classes[0] if classes else "<none>"
        raise InsufficientClassDataError(
            only, len(ds), message=f"multiclass training needs at least 2 classes, found only {only}"
        )
    for label in classes:
        if counts[label] < 2:
            raise InsufficientClassDataError(label, counts[label])

    norm = normalize_fit(ds.features)
    X = norm.apply(ds.features)
    labels = np.asarray(ds.labels)

    models = []
    pairs = list(combinations(classes, 2))
    for a, b in tqdm(pairs, desc="Training pair models", disable=not progress):
        first, second = sorted((a, b))
        mask = (labels == first) | (labels == second)
        signs = np.where(labels[mask] == first, 1.0, -1.0)
        models.append(
            train_binary(X[mask], signs, C, kernel, tol, max_passes, class_pair=(first, second))
        )
    logger.info(
        f"Trained {len(models)} pair models over {len(classes)} classes, "
        f"{sum(m.m for m in models)} support vectors in total"
    )
    return MulticlassModel(tuple(classes), norm, tuple(models), kernel, float(C), float(tol), seed)


def _vote(model: MulticlassModel, values: np.ndarray) -> Prediction:
    votes = {label: 0 for label in model.class_list}
    margins = {label: 0.0 for label in model.class_list}
    for pair_model, value in zip(model.binary_models, values):
        winner = binary_label(pair_model, value)
        votes[winner] += 1
        margins[winner] += abs(float(value))
    order = {label: i for i, label in enumerate(model.class_list)}
    label = max(model.class_list, key=lambda c: (votes[c], margins[c], -order[c]))
    return Prediction(label, votes, margins)


def predict_multiclass(model: MulticlassModel, x) -> Prediction:
    """Majority vote over all pair models.

    Ties go to the class with the largest sum of |f(x)| over the pair
    models it won, then to canonical order.
    """
    x = np.asarray(x.as_array() if hasattr(x, "as_array") else x, dtype=np.float64)
    dimension = model.normalization.minimum.shape[0]
    if x.shape != (dimension,):
        raise DimensionMismatchError(f"expected {dimension} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError(f"non-finite feature vector: {x.tolist()}")
    xn = model.normalization.apply(x)[np.newaxis, :]
    values = [float(m.decision(xn)[0]) for m in model.binary_models]
    return _vote(model, np.asarray(values))


def predict_many(model: MulticlassModel, rows) -> List[str]:
    """Labels for a 2-D array of rows, evaluating each pair model once."""
    X = _as_rows(rows)
    if X.shape[1] != model.normalization.minimum.shape[0]:
        raise DimensionMismatchError(
            f"expected {model.normalization.minimum.shape[0]} features, got {X.shape[1]}"
        )
    Xn = model.normalization.apply(X)
    values = np.column_stack([m.decision(Xn) for m in model.binary_models])
    return [_vote(model, row).label for row in values]


def training_summary(model: MulticlassModel) -> List[List]:
    """Rows of (pair, support count, bias) for display."""
    return [[f"{m.class_pair[0]} vs {m.class_pair[1]}", m.m, m.bias] for m in model.binary_models]


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_model(model: MulticlassModel, path: str) -> None:
    """Write a model in the versioned AMCSVM1 text format."""
    lines = [
        MODEL_VERSION,
        f"kernel {model.kernel.kind} {int(model.kernel.degree)} {float(model.kernel.offset)!r}",
        f"C {model.c!r}",
        f"tol {model.tol!r}",
        f"seed {'none' if model.seed is None else model.seed}",
        f"classes {len(model.class_list)} {' '.join(model.class_list)}",
        f"norm_min {_floats(model.normalization.minimum)}",
        f"norm_max {_floats(model.normalization.maximum)}",
        f"pairs {len(model.binary_models)}",
    ]
    for m in model.binary_models:
        lines.append(f"pair {m.class_pair[0]} {m.class_pair[1]}")
        lines.append(f"m {m.m}")
        lines.append(f"b {m.bias!r}")
        for weight, vector in zip(m.weights, m.support_vectors):
            lines.append(f"{float(weight)!r} {_floats(vector)}")
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"Saved model with {len(model.binary_models)} pair models to {path}")


class _LineReader:
    def __init__(self, text: str, path: str):
        self.lines = text.split("\n")
        self.path = path
        self.index = 0
        self.offset = 0
        self.line_offset = 0

    def next(self, tag: Optional[str] = None) -> List[str]:
        if self.index >= len(self.lines) or (
            self.index == len(self.lines) - 1 and self.lines[-1] == ""
        ):
            raise FormatError("unexpected end of model file", self.offset, self.path)
        line = self.lines[self.index]
        self.line_offset = self.offset
        self.offset += len(line) + 1
        self.index += 1
        parts = line.split()
        if tag is not None and (not parts or parts[0] != tag):
            raise self.error(f"expected '{tag}' line")
        return parts[1:] if tag is not None else parts

    def error(self, message: str) -> FormatError:
        return FormatError(message, self.line_offset, self.path)

    def floats(self, parts: List[str], count: Optional[int] = None) -> np.ndarray:
        try:
            values = np.array([float(p) for p in parts], dtype=np.float64)
        except ValueError:
            raise self.error("malformed number")
        if count is not None and values.shape[0] != count:
            raise self.error(f"expected {count} values, got {values.shape[0]}")
        return values

    def integer(self, text: str) -> int:
        try:
            return int(text)
        except ValueError:
            raise self.error(f"malformed integer {text!r}")


def load_model(path: str) -> MulticlassModel:
    """Read an AMCSVM1 model file; any other version tag is rejected."""
    try:
        with open(path, "r", encoding="ascii") as f:
            text = f.read()
    except UnicodeDecodeError:
        raise FormatError("model file is not ASCII text", 0, path)
    reader = _LineReader(text, path)

    header = reader.next()
    if header != [MODEL_VERSION]:
        raise reader.error(f"unknown model version tag {' '.join(header)!r}")
    kernel_parts = reader.next("kernel")
    if len(kernel_parts) != 3 or kernel_parts[0] != "polynomial":
        raise reader.error("unsupported kernel line")
    try:
        kernel = KernelSpec(reader.integer(kernel_parts[1]), float(kernel_parts[2]))
    except (ValueError, ConfigurationError) as e:
        raise reader.error(f"invalid kernel: {str(e)}")
    c = float(reader.floats(reader.next("C"), 1)[0])
    tol = float(reader.floats(reader.next("tol"), 1)[0])
    seed_parts = reader.next("seed")
    seed = None if seed_parts == ["none"] else reader.integer(seed_parts[0] if seed_parts else "")
    class_parts = reader.next("classes")
    if not class_parts or reader.integer(class_parts[0]) != len(class_parts) - 1:
        raise reader.error("class count does not match class list")
    class_list = tuple(class_parts[1:])
    if len(set(class_list)) != len(class_list):
        raise reader.error("duplicate label in class list")
    minimum = reader.floats(reader.next("norm_min"))
    maximum = reader.floats(reader.next("norm_max"), minimum.shape[0])
    dimension = minimum.shape[0]
    pair_count = reader.integer((reader.next("pairs") or [""])[0])
    expected = len(class_list) * (len(class_list) - 1) // 2
    if pair_count != expected:
        raise reader.error(f"{len(class_list)} classes need {expected} pair models, got {pair_count}")

    models = []
    seen = set()
    for _ in range(pair_count):
        pair = reader.next("pair")
        if len(pair) != 2:
            raise reader.error("pair line needs two class labels")
        if pair[0] == pair[1] or not set(pair) <= set(class_list):
            raise reader.error(f"pair {pair[0]} {pair[1]} is not two distinct listed classes")
        if frozenset(pair) in seen:
            raise reader.error(f"duplicate pair {pair[0]} {pair[1]}")
        seen.add(frozenset(pair))
        m = reader.integer((reader.next("m") or [""])[0])
        bias = float(reader.floats(reader.next("b"), 1)[0])
        weights = np.empty(m)
        vectors = np.empty((m, dimension))
        for k in range(m):
            values = reader.floats(reader.next(), dimension + 1)
            weights[k] = values[0]
            vectors[k] = values[1:]
        models.append(BinarySvmModel(vectors, weights, bias, kernel, c, (pair[0], pair[1]), tol))

    rest = reader.lines[reader.index :]
    if any(line.strip() for line in rest):
        raise FormatError("trailing data after last pair model", reader.offset, path)
    logger.info(f"Loaded model with {len(models)} pair models from {path}")
    return MulticlassModel(class_list, Normalization(minimum, maximum), tuple(models), kernel, c, tol, seed)
