"""Linear 1-vs-all SVM training with cross-validated hyperparameters.

The per-event problem is the primal L2-regularized hinge loss

    J(w, b) = 1/2 ||w||^2 + c * sum_i max(0, 1 - y_i (w^T x_i + b))

with an explicit unregularized bias. It is solved exactly through its
dual,

    min_a  1/2 a^T Q a - 1^T a,   0 <= a <= c,  y^T a = 0,
    Q_ij = y_i y_j x_i^T x_j,

by deterministic most-violating-pair coordinate updates (each step is an
exact two-variable minimization, so the dual objective is monotonically
non-increasing). The primal solution is w = X^T (a * y) with the bias
read off the free support vectors. Training is deterministic: pair
selection breaks ties by lowest index and uses no randomness (the seed
parameter only feeds fold shuffling in cross-validation).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError
from .rng import make_rng

__all__ = [
    "LinearSvm",
    "EventModel",
    "CvResult",
    "train_svm",
    "svm_objective",
    "decision_score",
    "predict_event",
    "train_event_models",
    "stratified_folds",
    "cross_validate",
]


@dataclass(frozen=True)
class LinearSvm:
    """Trained separating hyperplane for one event."""

    weights: np.ndarray
    bias: float
    c: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise InputError(f"weights must be 1-D, got shape {w.shape}")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise InputError("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class EventModel:
    """One LinearSvm per event id, all over the same feature space."""

    event_ids: Tuple[str, ...]
    models: Tuple[LinearSvm, ...]

    def __post_init__(self):
        if len(self.event_ids) != len(self.models) or not self.models:
            raise InputError("need one model per event id")
        dims = {m.weights.shape[0] for m in self.models}
        if len(dims) != 1:
            raise InputError(f"inconsistent feature dimensions across events: {dims}")
        object.__setattr__(self, "event_ids", tuple(str(e) for e in self.event_ids))


@dataclass(frozen=True)
class CvResult:
    """Cross-validation outcome: chosen c and the per-c mean accuracy."""

    best_c: float
    mean_accuracy: Dict[float, float]
    folds_used: int
    reduced: bool


def _validate_features(x) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError(f"features must be a non-empty 2-D matrix, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("features contain non-finite values")
    return X


def _smo(
    gram: np.ndarray,
    y: np.ndarray,
    c: float,
    tol: float,
    max_steps: int,
    epoch_len: int,
    trace: Optional[list],
) -> Tuple[np.ndarray, np.ndarray]:
    """Most-violating-pair dual coordinate optimization; returns
    (alpha, dual gradient)."""
    n = y.shape[0]
    Q = gram * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q @ alpha - 1

    def record():
        if trace is not None:
            trace.append(0.5 * float(alpha @ grad - alpha.sum()))

    pos = y > 0
    for step in range(1, max_steps + 1):
        mg = -y * grad
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        if not up.any() or not low.any():
            break
        mg_up = np.where(up, mg, -np.inf)
        mg_low = np.where(low, mg, np.inf)
        i = int(np.argmax(mg_up))
        j = int(np.argmin(mg_low))
        if mg_up[i] - mg_low[j] < tol:
            break
        si, sj = y[i], y[j]
        quad = max(Q[i, i] + Q[j, j] - 2.0 * si * sj * Q[i, j], 1e-12)
        t = -(si * grad[i] - sj * grad[j]) / quad
        lo_i, hi_i = sorted(((0.0 - alpha[i]) * si, (c - alpha[i]) * si))
        lo_j, hi_j = sorted(((alpha[j] - c) * sj, alpha[j] * sj))
        t = min(max(t, max(lo_i, lo_j)), min(hi_i, hi_j))
        if t == 0.0:
            break
        d_i, d_j = si * t, -sj * t
        alpha[i] = min(max(alpha[i] + d_i, 0.0), c)
        alpha[j] = min(max(alpha[j] + d_j, 0.0), c)
        grad += Q[:, i] * d_i + Q[:, j] * d_j
        if step % epoch_len == 0:
            record()
    record()
    return alpha, grad


def _bias_from_dual(alpha, grad, y, c) -> float:
    mg = -y * grad
    free = np.flatnonzero((alpha > 1e-12 * c) & (alpha < c * (1.0 - 1e-12)))
    if free.size:
        return float(np.mean(mg[free]))
    pos = y > 0
    up = np.where(pos, alpha < c, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < c)
    hi = float(np.max(mg[up])) if up.any() else 0.0
    lo = float(np.min(mg[low])) if low.any() else 0.0
    return 0.5 * (hi + lo)


def train_svm(
    x,
    labels,
    c: float,
    seed: int = 0,
    tol: float = 1e-9,
    max_steps: Optional[int] = None,
    trace: Optional[list] = None,
) -> LinearSvm:
    """Train one binary SVM on +/-1 labels.

    `trace`, when given a list, collects the dual objective at each epoch
    (n pair updates); the sequence is non-increasing. The result is the
    exact optimizer of the hinge objective up to `tol` in the KKT gap,
    independent of `seed`.
    """
    X = _validate_features(x)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise InputError(f"labels shape {y.shape} does not match {X.shape[0]} rows")
    if not np.all(np.abs(y) == 1.0):
        raise InputError("labels must be +1 or -1")
    if np.all(y == 1.0) or np.all(y == -1.0):
        raise InputError("training requires at least one example of each class")
    if c <= 0:
        raise InputError(f"c must be positive, got {c}")

    gram = X @ X.T
    n = X.shape[0]
    budget = max_steps if max_steps is not None else max(200 * n, 20000)
    alpha, grad = _smo(gram, y, c, tol, budget, epoch_len=n, trace=trace)
    w = X.T @ (alpha * y)
    b = _bias_from_dual(alpha, grad, y, c)
    return LinearSvm(weights=w, bias=b, c=c)


def svm_objective(m: LinearSvm, x, labels) -> float:
    """Primal hinge objective of a model on a labeled set."""
    X = _validate_features(x)
    y = np.asarray(labels, dtype=np.float64)
    margins = y * (X @ m.weights + m.bias)
    return float(0.5 * m.weights @ m.weights + m.c * np.sum(np.maximum(0.0, 1.0 - margins)))


def decision_score(m: LinearSvm, x) -> float:
    """w^T x + b; the sign is the predicted label."""
    v = np.asarray(x, dtype=np.float64)
    if v.shape != m.weights.shape:
        raise InputError(f"input shape {v.shape} does not match weights {m.weights.shape}")
    return float(m.weights @ v + m.bias)


def predict_event(em: EventModel, x) -> str:
    """Event id with the maximal decision score; ties go to the lowest id."""
    best_id = None
    best_score = None
    for event_id, model in sorted(zip(em.event_ids, em.models), key=lambda p: p[0]):
        s = decision_score(model, x)
        if best_score is None or s > best_score:
            best_id, best_score = event_id, s
    return best_id


def train_event_models(
    x,
    event_labels: Sequence,
    c: float,
    seed: int = 0,
    tol: float = 1e-9,
) -> EventModel:
    """1-vs-all training: one binary SVM per distinct event label, with
    every other label (including any background label) as negatives."""
    X = _validate_features(x)
    labels = [str(v) for v in event_labels]
    if len(labels) != X.shape[0]:
        raise InputError("one label per feature row required")
    event_ids = sorted(set(labels))
    if len(event_ids) < 2:
        raise InputError("need at least two distinct labels to train 1-vs-all models")
    models = []
    for event in event_ids:
        y = np.array([1.0 if v == event else -1.0 for v in labels])
        models.append(train_svm(X, y, c, seed=seed, tol=tol))
    return EventModel(event_ids=tuple(event_ids), models=tuple(models))


def stratified_folds(labels: Sequence, folds: int, seed: int) -> Tuple[np.ndarray, int, bool]:
    """Assign each index to a validation fold, stratified by label.

    Returns (fold_id per index, folds_used, reduced). folds_used shrinks
    to the smallest class count when a class has fewer examples than the
    requested fold count.
    """
    labels = [str(v) for v in labels]
    if folds < 2:
        raise InputError(f"folds must be >= 2, got {folds}")
    counts: Dict[str, int] = {}
    for v in labels:
        counts[v] = counts.get(v, 0) + 1
    min_count = min(counts.values())
    if min_count < 2:
        raise InputError("every class needs >= 2 examples for cross-validation")
    folds_used = min(folds, min_count)
    reduced = folds_used < folds

    rng = make_rng(seed, "cv-folds")
    assignment = np.empty(len(labels), dtype=np.int64)
    for value in sorted(counts):
        idx = np.array([i for i, v in enumerate(labels) if v == value])
        idx = idx[rng.permutation(idx.size)]
        for pos, i in enumerate(idx):
            assignment[i] = pos % folds_used
    return assignment, folds_used, reduced


def cross_validate(
    x,
    labels: Sequence,
    c_grid: Sequence[float],
    folds: int = 5,
    seed: int = 0,
) -> CvResult:
    """Pick c from a grid by mean validation accuracy over stratified
    folds; ties prefer the smaller c."""
    X = _validate_features(x)
    grid = [float(c) for c in c_grid]
    if not grid:
        raise InputError("c grid must not be empty")
    labels = [str(v) for v in labels]
    assignment, folds_used, reduced = stratified_folds(labels, folds, seed)

    mean_acc: Dict[float, float] = {}
    for c in grid:
        accs = []
        for fold in range(folds_used):
            val = assignment == fold
            train = ~val
            em = train_event_models(X[train], [l for l, t in zip(labels, train) if t], c, seed=seed)
            correct = sum(
                predict_event(em, X[i]) == labels[i] for i in np.flatnonzero(val)
            )
            accs.append(correct / int(val.sum()))
        mean_acc[c] = float(np.mean(accs))

    best_acc = max(mean_acc.values())
    best_c = min(c for c, a in mean_acc.items() if a == best_acc)
    return CvResult(best_c=best_c, mean_accuracy=mean_acc, folds_used=folds_used, reduced=reduced)
