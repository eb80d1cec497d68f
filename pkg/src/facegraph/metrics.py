"""
Video-level evaluation metrics: log loss, accuracy and macro-F1.

Conventions:
- Log loss clips probabilities to [1e-15, 1 - 1e-15] before taking logs.
- A score of exactly 0.5 is an abstention and counts as wrong for accuracy.
  For F1 it is predicted neither class, so it is a false negative for its
  true class.
- Per-class F1 is 0 when precision + recall is 0, including for a class
  absent from both labels and predictions.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import xlogy

from .errors import EmptyInput

EPSILON = 1e-15


@dataclass(frozen=True)
class LabeledVerdict:
    """A video verdict joined with its ground-truth label."""

    video_id: str
    score: float
    label: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.label not in (0, 1):
            raise ValueError(f"label {self.label} is not 0 or 1")


def _arrays(items: Sequence[LabeledVerdict]):
    if not items:
        raise EmptyInput("metrics need at least one labeled verdict")
    scores = np.fromiter((i.score for i in items), dtype=np.float64, count=len(items))
    labels = np.fromiter((i.label for i in items), dtype=np.int64, count=len(items))
    return scores, labels


def _predictions(scores: np.ndarray) -> np.ndarray:
    """1 = fake, 0 = real, -1 = abstain (score exactly 0.5)."""
    return np.where(scores > 0.5, 1, np.where(scores < 0.5, 0, -1))


def log_loss(items: Sequence[LabeledVerdict]) -> float:
    """Mean binary cross-entropy of video scores against labels."""
    scores, labels = _arrays(items)
    p = np.clip(scores, EPSILON, 1.0 - EPSILON)
    y = labels.astype(np.float64)
    losses = -(xlogy(y, p) + xlogy(1.0 - y, 1.0 - p))
    return float(np.mean(losses))


def accuracy(items: Sequence[LabeledVerdict]) -> float:
    """Fraction of videos whose predicted class equals the label."""
    scores, labels = _arrays(items)
    return float(np.mean(_predictions(scores) == labels))


def macro_f1(items: Sequence[LabeledVerdict]) -> float:
    """Unweighted mean of the real-class and fake-class F1 scores."""
    scores, labels = _arrays(items)
    predicted = _predictions(scores)
    f1s = []
    for cls in (0, 1):
        tp = int(np.sum((predicted == cls) & (labels == cls)))
        fp = int(np.sum((predicted == cls) & (labels != cls)))
        fn = int(np.sum((predicted != cls) & (labels == cls)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        denom = precision + recall
        f1s.append(2 * precision * recall / denom if denom else 0.0)
    return float(np.mean(f1s))


def evaluate(items: Sequence[LabeledVerdict]) -> Dict[str, float]:
    """
    All metrics in report order.

    Returns:
        {"log_loss", "accuracy", "macro_f1", "n_videos"}

    Raises:
        EmptyInput: If items is empty
    """
    return {
        "log_loss": log_loss(items),
        "accuracy": accuracy(items),
        "macro_f1": macro_f1(items),
        "n_videos": len(items),
    }


def balance_classes(
    items: Sequence[LabeledVerdict], seed: Optional[int] = 0
) -> List[LabeledVerdict]:
    """
    Randomly subsample the majority class down to the minority class size.

    The result keeps the input order of the retained items. If either class
    is missing, the input is returned unchanged.
    """
    by_class = {0: [], 1: []}
    for index, item in enumerate(items):
        by_class[item.label].append(index)
    n_min = min(len(by_class[0]), len(by_class[1]))
    if n_min == 0:
        return list(items)

    rng = np.random.default_rng(seed)
    keep = set()
    for indices in by_class.values():
        if len(indices) > n_min:
            chosen = rng.choice(len(indices), size=n_min, replace=False)
            keep.update(indices[i] for i in chosen.tolist())
        else:
            keep.update(indices)
    return [item for index, item in enumerate(items) if index in keep]
