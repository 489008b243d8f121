"""Linear SVM forecasting of post-block trajectories.

The classifier is a primal linear SVM trained by stochastic subgradient
descent (Pegasos step size ``1 / (lambda * t)``). Evaluation selects the
regularisation constant on a stratified development split and reports
leave-one-out accuracy on the remaining rows.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .errors import DegenerateInput, EmptyDataset, GridEmpty, MissingFeature, TooFewRows
from .features import DurationClass, UserFeatures
from .ingest import DAY, ReasonCategory
from .matching import PairKind
from .stats import mcnemar_exact

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_EPOCHS = 50
DEFAULT_SEED = 42


class FeatureSet(str, Enum):
    BASELINE_REASON = "BaselineReason"
    BASELINE_DURATION = "BaselineDuration"
    COMMUNITY_AGE = "CommunityAge"
    ENGAGEMENT = "Engagement"
    ENGAGEMENT_PLUS_AGE = "EngagementPlusAge"


BASELINES = (FeatureSet.BASELINE_REASON, FeatureSet.BASELINE_DURATION)


class Task(str, Enum):
    DEPARTURE = "Departure"
    RECID_LONG = "RecidLong"
    RECID_SHORT = "RecidShort"


TASK_PAIR_KIND = {
    Task.DEPARTURE: PairKind.DEPARTURE_BLOCKED,
    Task.RECID_LONG: PairKind.RECID_LONG,
    Task.RECID_SHORT: PairKind.RECID_SHORT,
}

ENGAGEMENT_COLUMNS = (
    "received_per_day",
    "contributed_per_day",
    "received_raw",
    "contributed_raw",
    "received_spread",
    "contributed_spread",
)
REASON_COLUMNS = (
    ("reason_personal_attack", ReasonCategory.PERSONAL_ATTACK),
    ("reason_harassment", ReasonCategory.HARASSMENT),
    ("reason_edit_warring", ReasonCategory.EDIT_WARRING),
    ("reason_disruptive_editing", ReasonCategory.DISRUPTIVE_EDITING),
)


def feature_columns(feature_set: FeatureSet) -> tuple[str, ...]:
    fs = FeatureSet(feature_set)
    if fs is FeatureSet.BASELINE_REASON:
        return tuple(name for name, _ in REASON_COLUMNS)
    if fs is FeatureSet.BASELINE_DURATION:
        return ("log1p_duration_days", "is_short")
    if fs is FeatureSet.COMMUNITY_AGE:
        return ("community_age_days",)
    if fs is FeatureSet.ENGAGEMENT:
        return ENGAGEMENT_COLUMNS
    return ENGAGEMENT_COLUMNS + ("community_age_days",)


def _feature_value(f: UserFeatures, column: str) -> float:
    if column.startswith("reason_"):
        category = dict(REASON_COLUMNS)[column]
        return float(f.context.reason_category is category)
    if column == "log1p_duration_days":
        return math.log1p(f.context.original_duration_s / DAY)
    if column == "is_short":
        return float(f.context.duration_class is DurationClass.SHORT)
    value = getattr(f.engagement, column)
    return math.nan if value is None else float(value)


@dataclass
class FeatureMatrix:
    """Rows sorted by user id; ``X`` holds NaN where a spread is undefined."""

    users: list
    columns: tuple
    X: np.ndarray
    y: np.ndarray
    feature_set_tag: FeatureSet

    def __len__(self):
        return len(self.users)


def build_feature_matrix(
    pairs: Sequence,
    features: Mapping[str, UserFeatures],
    feature_set: FeatureSet | str,
) -> FeatureMatrix:
    """Two rows per pair: the left user labelled +1, the right user -1."""
    fs = FeatureSet(feature_set)
    if not pairs:
        raise EmptyDataset("no pairs to build a feature matrix from")
    labels = {}
    for p in pairs:
        labels[p.left] = 1.0
        labels[p.right] = -1.0
    users = sorted(labels)
    cols = feature_columns(fs)
    X = np.empty((len(users), len(cols)))
    for i, u in enumerate(users):
        if u not in features:
            raise MissingFeature(f"no features for user {u!r}")
        X[i] = [_feature_value(features[u], c) for c in cols]
    y = np.array([labels[u] for u in users])
    return FeatureMatrix(users, cols, X, y, fs)


# ---------------------------------------------------------------------------
# standardisation


@dataclass
class Standardizer:
    """Per-column mean imputation and z-scaling fitted on training rows.

    Columns that are constant (or entirely missing) in training are dropped
    by giving them zero weight.
    """

    impute: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        observed = ~np.isnan(X)
        counts = observed.sum(axis=0)
        sums = np.where(observed, X, 0.0).sum(axis=0)
        impute = np.divide(sums, counts, out=np.zeros(X.shape[1]), where=counts > 0)
        filled = np.where(observed, X, impute)
        mean = filled.mean(axis=0)
        std = filled.std(axis=0)
        keep = (counts > 0) & (std > 0)
        std = np.where(keep, std, 1.0)
        return cls(impute, mean, std, keep)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        filled = np.where(np.isnan(X), self.impute, X)
        Z = (filled - self.mean) / self.std
        Z[:, ~self.keep] = 0.0
        return Z


# ---------------------------------------------------------------------------
# training


@njit(cache=True, nogil=True)
def _pegasos(X, y, v, lam, perms, radius):
    n, d = X.shape
    epochs = perms.shape[0]
    w = np.zeros(d + 1)  # last slot is the bias
    avg = np.zeros(d + 1)
    n_avg = 0
    total = epochs * n
    t = 0
    for e in range(epochs):
        for k in range(n):
            i = perms[e, k]
            t += 1
            eta = 1.0 / (lam * t)
            s = w[d]
            for j in range(d):
                s += w[j] * X[i, j]
            shrink = 1.0 - eta * lam
            for j in range(d + 1):
                w[j] *= shrink
            if y[i] * s < 1.0:
                step = eta * v[i] * y[i]
                for j in range(d):
                    w[j] += step * X[i, j]
                w[d] += step
            norm = 0.0
            for j in range(d + 1):
                norm += w[j] * w[j]
            norm = math.sqrt(norm)
            if norm > radius:
                for j in range(d + 1):
                    w[j] *= radius / norm
            if 2 * t > total:
                for j in range(d + 1):
                    avg[j] += w[j]
                n_avg += 1
    for j in range(d + 1):
        avg[j] /= n_avg
    return avg


def class_weights(y: np.ndarray, balanced: bool = True) -> np.ndarray:
    """Per-row hinge weights; balanced weights give each class half the mass."""
    y = np.asarray(y, dtype=float)
    if not balanced:
        return np.ones(len(y))
    n, n_pos = len(y), int((y > 0).sum())
    n_neg = n - n_pos
    return np.where(y > 0, n / (2.0 * n_pos), n / (2.0 * n_neg))


def svm_objective(w, b, X, y, lam, balanced: bool = True) -> float:
    """``lam/2 * |w|^2 + mean weighted hinge``; the bias is not regularised."""
    margins = y * (X @ w + b)
    v = class_weights(y, balanced)
    return 0.5 * lam * float(w @ w) + float((v * np.maximum(0.0, 1.0 - margins)).mean())


def optimal_bias(scores: np.ndarray, y: np.ndarray, balanced: bool = True) -> float:
    """Bias minimising the (class-weighted) hinge loss for fixed scores ``w . x``.

    The loss is convex and piecewise linear in the bias with kinks at
    ``y_i - s_i``. Slopes are kept in integers (weights ``n_neg`` for
    positives, ``n_pos`` for negatives) so flat stretches are detected
    exactly; a flat minimum returns the midpoint of its interval.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = y > 0
    wp, wn = (int((~pos).sum()), int(pos.sum())) if balanced else (1, 1)
    kinks = y - scores
    u = np.unique(kinks)
    pos_k = np.sort(kinks[pos])
    neg_k = np.sort(kinks[~pos])
    # right derivative just after u_j: -wp * #(pos kinks > b) + wn * #(neg kinks <= b)
    pos_after = len(pos_k) - np.searchsorted(pos_k, u, side="right")
    neg_upto = np.searchsorted(neg_k, u, side="right")
    slope = wn * neg_upto - wp * pos_after
    j = int(np.argmax(slope >= 0))
    if slope[j] == 0 and j + 1 < len(u):
        return float(0.5 * (u[j] + u[j + 1]))
    return float(u[j])


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    c: float
    standardization: Standardizer | None = None
    history: list = field(default_factory=list)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.standardization is not None:
            X = self.standardization.transform(X)
        return X @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1.0, -1.0)


def train_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    c: float,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    balanced: bool = True,
) -> SvmModel:
    """Fit ``min lam/2 |w|^2 + mean v_i hinge(y_i (w.x_i + b))`` with ``lam = 1/(c n)``.

    With ``balanced`` the weights ``v_i`` give each class equal total mass.
    On the balanced matrices built from matched pairs every ``v_i`` is 1;
    it matters in leave-one-out folds, where the held-out row's class is
    otherwise always the minority and a signal-free model always errs.

    Updates follow the Pegasos schedule over seed-driven epoch shuffles with
    projection onto the ball of radius ``1/sqrt(lam)``. The returned weights
    are the average of the second half of iterates, after which the bias is
    set to its exact minimiser. Same inputs and seed give identical models.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise EmptyDataset("no training rows")
    if len(np.unique(y)) < 2:
        raise DegenerateInput("training labels contain a single class")
    if c <= 0:
        raise ValueError("c must be positive")
    lam = 1.0 / (c * n)
    v = class_weights(y, balanced)
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    wb = _pegasos(X, y, v, lam, perms, math.sqrt(float(v.max()) / lam))
    w = wb[:-1].copy()
    b = optimal_bias(X @ w, y, balanced)
    return SvmModel(w, b, c)


def fit_svm(X_raw, y, c, epochs=DEFAULT_EPOCHS, seed=0) -> SvmModel:
    """Standardise on these rows, then train; the model keeps the scaler."""
    scaler = Standardizer.fit(X_raw)
    model = train_linear_svm(scaler.transform(X_raw), y, c, epochs, seed)
    model.standardization = scaler
    return model


# ---------------------------------------------------------------------------
# evaluation


def stratified_dev_split(y: np.ndarray, dev_fraction: float, seed: int):
    """Boolean dev mask with ``round(dev_fraction * n_class)`` rows per class."""
    rng = np.random.default_rng(seed)
    dev = np.zeros(len(y), dtype=bool)
    for label in (-1.0, 1.0):
        idx = np.flatnonzero(y == label)
        take = int(round(dev_fraction * len(idx)))
        dev[rng.permutation(idx)[:take]] = True
    return dev


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("MODTRAJ_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class TaskEval:
    feature_set: FeatureSet
    accuracy: float
    c: float
    dev_accuracy: dict
    users: list  # LOOCV rows, canonical order
    y_true: np.ndarray
    y_pred: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        return self.y_true == self.y_pred


def evaluate_loocv(
    matrix: FeatureMatrix,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    dev_fraction: float = 0.2,
    seed: int = DEFAULT_SEED,
    epochs: int = DEFAULT_EPOCHS,
) -> TaskEval:
    """Pick ``c`` on a held-out dev split, then run LOOCV on the other rows.

    Each candidate ``c`` is trained on the non-dev rows and scored on the
    dev rows (ties go to the smaller ``c``). Every LOOCV fold refits the
    scaler and the model on its own training rows only.
    """
    if not c_grid:
        raise GridEmpty("c_grid is empty")
    if len(matrix) < 10:
        raise TooFewRows(f"need at least 10 rows, got {len(matrix)}")
    X, y = matrix.X, matrix.y
    dev = stratified_dev_split(y, dev_fraction, seed)
    rest = np.flatnonzero(~dev)
    dev_idx = np.flatnonzero(dev)

    dev_acc = {}
    best_c, best_acc = None, -1.0
    for c in sorted(c_grid):
        if len(dev_idx):
            model = fit_svm(X[rest], y[rest], c, epochs, seed)
            acc = float((model.predict(X[dev_idx]) == y[dev_idx]).mean())
        else:
            acc = 0.0
        dev_acc[c] = acc
        if acc > best_acc:
            best_c, best_acc = c, acc

    def fold(k):
        train = np.delete(rest, k)
        model = fit_svm(X[train], y[train], best_c, epochs, seed + k + 1)
        return model.predict(X[rest[k : k + 1]])[0]

    workers = _n_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            preds = list(pool.map(fold, range(len(rest))))
    else:
        preds = [fold(k) for k in range(len(rest))]
    y_pred = np.array(preds)
    y_true = y[rest]
    return TaskEval(
        feature_set=matrix.feature_set_tag,
        accuracy=float((y_pred == y_true).mean()),
        c=best_c,
        dev_accuracy=dev_acc,
        users=[matrix.users[i] for i in rest],
        y_true=y_true,
        y_pred=y_pred,
    )


@dataclass
class EvalReport:
    """Accuracy per (task, feature set) with McNemar p vs the best baseline."""

    results: dict = field(default_factory=dict)  # (Task, FeatureSet) -> TaskEval
    p_values: dict = field(default_factory=dict)  # (Task, FeatureSet) -> float
    best_baseline: dict = field(default_factory=dict)  # Task -> FeatureSet

    def accuracy(self, task, feature_set) -> float:
        return self.results[Task(task), FeatureSet(feature_set)].accuracy

    def significant(self, task, feature_set, alpha: float = 0.05) -> bool:
        key = (Task(task), FeatureSet(feature_set))
        best = self.best_baseline.get(key[0])
        return (
            best is not None
            and key in self.p_values
            and self.p_values[key] < alpha
            and self.results[key].accuracy > self.results[key[0], best].accuracy
        )

    def table_rows(self) -> list[dict]:
        rows = []
        tasks = sorted({t for t, _ in self.results}, key=list(Task).index)
        for fs in FeatureSet:
            row = {"feature_set": fs.value}
            for task in tasks:
                key = (task, fs)
                if key not in self.results:
                    continue
                row[f"{task.value}_acc"] = self.results[key].accuracy
                row[f"{task.value}_p"] = self.p_values.get(key)
                row[f"{task.value}_sig"] = self.significant(task, fs)
            rows.append(row)
        return rows

    def to_json(self) -> dict:
        out = {"tasks": {}}
        for (task, fs), ev in sorted(
            self.results.items(), key=lambda kv: (list(Task).index(kv[0][0]), list(FeatureSet).index(kv[0][1]))
        ):
            entry = out["tasks"].setdefault(
                task.value, {"best_baseline": self.best_baseline[task].value, "feature_sets": {}}
            )
            entry["feature_sets"][fs.value] = {
                "accuracy": ev.accuracy,
                "c": ev.c,
                "dev_accuracy": {repr(k): v for k, v in ev.dev_accuracy.items()},
                "p_vs_best_baseline": self.p_values.get((task, fs)),
                "predictions": [
                    {"user": u, "y": int(t), "pred": int(p)}
                    for u, t, p in zip(ev.users, ev.y_true, ev.y_pred)
                ],
            }
        return out


def run_all_tasks(
    pairs_by_task: Mapping[Task, Sequence],
    features: Mapping[str, UserFeatures],
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    dev_fraction: float = 0.2,
    seed: int = DEFAULT_SEED,
    epochs: int = DEFAULT_EPOCHS,
    feature_sets: Sequence[FeatureSet] = tuple(FeatureSet),
) -> EvalReport:
    """Evaluate every feature set on every task with enough pairs.

    Tasks with fewer than 10 rows are skipped. All feature sets of a task
    share the same rows and dev split, so their LOOCV predictions are
    paired and McNemar applies.
    """
    report = EvalReport()
    for task in Task:
        pairs = pairs_by_task.get(task) or []
        if 2 * len(pairs) < 10:
            continue
        for fs in feature_sets:
            matrix = build_feature_matrix(pairs, features, fs)
            report.results[task, FeatureSet(fs)] = evaluate_loocv(
                matrix, c_grid, dev_fraction, seed, epochs
            )
        baselines = [b for b in BASELINES if (task, b) in report.results]
        if not baselines:
            continue
        best = max(baselines, key=lambda b: (report.results[task, b].accuracy, -BASELINES.index(b)))
        report.best_baseline[task] = best
        for fs in feature_sets:
            fs = FeatureSet(fs)
            if fs in BASELINES:
                continue
            res = mcnemar_exact(
                report.results[task, fs].correct, report.results[task, best].correct
            )
            report.p_values[task, fs] = res.p_value
    return report
