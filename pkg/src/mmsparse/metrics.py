"""Detection and retrieval metrics: accuracy, average precision, mAP.

Average precision is the non-interpolated variant: items are ranked by
score descending (ties broken by clip id ascending, so results are
deterministic) and AP averages precision-at-k over the relevant ranks,
with AP defined as 0 when nothing is relevant.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "RankedList",
    "average_precision",
    "mean_average_precision",
    "accuracy",
    "format_results",
]


@dataclass(frozen=True)
class RankedList:
    """Per-clip scores and binary relevance for one event."""

    scores: np.ndarray
    relevance: np.ndarray
    clip_ids: tuple

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        relevance = np.asarray(self.relevance, dtype=np.int64)
        ids = tuple(str(c) for c in self.clip_ids)
        if scores.ndim != 1 or scores.size < 1:
            raise InputError("scores must be a non-empty 1-D vector")
        if relevance.shape != scores.shape or len(ids) != scores.size:
            raise InputError("scores, relevance, and clip ids must align")
        if not np.all(np.isfinite(scores)):
            raise InputError("scores contain non-finite values")
        if not np.all((relevance == 0) | (relevance == 1)):
            raise InputError("relevance must be binary")
        scores.setflags(write=False)
        relevance.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "relevance", relevance)
        object.__setattr__(self, "clip_ids", ids)


def average_precision(r: RankedList) -> float:
    """Non-interpolated AP of one ranked list, in [0, 1]."""
    order = sorted(range(r.scores.size), key=lambda i: (-r.scores[i], r.clip_ids[i]))
    total_relevant = int(r.relevance.sum())
    if total_relevant == 0:
        return 0.0
    hits = 0
    ap = 0.0
    for rank, i in enumerate(order, start=1):
        if r.relevance[i]:
            hits += 1
            ap += hits / rank
    return ap / total_relevant


def mean_average_precision(ranked_lists: Sequence[RankedList]) -> float:
    """Unweighted mean of per-event APs."""
    lists = list(ranked_lists)
    if not lists:
        raise InputError("mean_average_precision requires at least one event")
    return float(np.mean([average_precision(r) for r in lists]))


def accuracy(predicted: Sequence, actual: Sequence) -> float:
    """Fraction of exactly matching predictions."""
    predicted = list(predicted)
    actual = list(actual)
    if len(predicted) != len(actual):
        raise InputError(
            f"prediction count {len(predicted)} != label count {len(actual)}"
        )
    if not predicted:
        raise InputError("accuracy requires at least one example")
    return sum(p == a for p, a in zip(predicted, actual)) / len(predicted)


def format_results(per_event_ap: Dict[str, float], map_value: float, acc: float) -> str:
    """Results record as UTF-8 key-value lines (one metric per line)."""
    lines = [f"accuracy={acc!r}", f"map={map_value!r}"]
    for event in sorted(per_event_ap):
        lines.append(f"ap.{event}={per_event_ap[event]!r}")
    return "\n".join(lines) + "\n"
