"""
Video-level aggregation of per-face fake probabilities.

Schemes:
- avg:    mean of all kept face scores
- median: median of kept scores (even count -> midpoint of the central pair)
- max:    maximum kept score
- face:   mean score per kept component, then the maximum over components

Only kept records contribute. A video with no kept records gets 0.5,
flagged as defaulted, under every scheme.
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingScore, RecordId
from .model import AggregationScheme, ComponentSet, FaceRecord, VideoVerdict

logger = logging.getLogger(__name__)

DEFAULT_SCORE = 0.5

ALL_SCHEMES: Tuple[AggregationScheme, ...] = (
    AggregationScheme.AVG,
    AggregationScheme.MEDIAN,
    AggregationScheme.MAX,
    AggregationScheme.FACE,
)


def scores_from_records(records: Iterable[FaceRecord]) -> Dict[RecordId, float]:
    """Map record id -> score for every record that carries one."""
    return {r.record_id: r.score for r in records if r.score is not None}


def _scores_for(ids: Sequence[RecordId], scores: Mapping[RecordId, float]) -> np.ndarray:
    values = []
    for rid in ids:
        value = scores.get(rid)
        if value is None:
            raise MissingScore(rid)
        values.append(value)
    return np.asarray(values, dtype=np.float64)


def _bounded_mean(values: np.ndarray) -> float:
    # The float mean can land one ulp outside [min, max]; clamp it back.
    return float(min(max(np.mean(values), values.min()), values.max()))


def component_means(
    component_set: ComponentSet, scores: Mapping[RecordId, float]
) -> List[Tuple[int, int, float]]:
    """
    Per-face predictions: mean score of each kept component.

    Returns:
        List of (component index, component size, mean score), in the
        component set's order. Indices match the `component` manifest field.

    Raises:
        MissingScore: If a kept record has no score
    """
    out = []
    for index, component in enumerate(component_set.components):
        if not component.kept:
            continue
        values = _scores_for(component.sorted_members(), scores)
        out.append((index, component.size, _bounded_mean(values)))
    return out


def aggregate(
    component_set: ComponentSet,
    scores: Mapping[RecordId, float],
    scheme: AggregationScheme = AggregationScheme.FACE,
) -> VideoVerdict:
    """
    Collapse the kept face scores of one video into a verdict.

    Kept records are visited in sorted record-id order, so verdicts do not
    depend on input order and a single kept component gives Face == Avg
    exactly.

    Args:
        component_set: Cleaned (or baseline) partition of the video
        scores: Record id -> fake probability
        scheme: Aggregation scheme

    Returns:
        VideoVerdict; defaulted to 0.5 when nothing is kept

    Raises:
        MissingScore: If a kept record has no score
    """
    scheme = AggregationScheme(scheme)
    kept_ids = component_set.kept_ids
    if not kept_ids:
        return VideoVerdict(component_set.video_id, scheme, DEFAULT_SCORE, defaulted=True)

    if scheme is AggregationScheme.FACE:
        score = max(mean for _, _, mean in component_means(component_set, scores))
    else:
        values = _scores_for(kept_ids, scores)
        if scheme is AggregationScheme.AVG:
            score = _bounded_mean(values)
        elif scheme is AggregationScheme.MEDIAN:
            score = float(np.median(values))
        else:
            score = float(values.max())

    return VideoVerdict(component_set.video_id, scheme, score, defaulted=False)


def aggregate_all(
    component_set: ComponentSet,
    scores: Mapping[RecordId, float],
    schemes: Iterable[AggregationScheme] = ALL_SCHEMES,
) -> List[VideoVerdict]:
    """Verdicts of one video under several schemes, in the order given."""
    return [aggregate(component_set, scores, scheme) for scheme in schemes]


def defaulted_verdicts(
    video_id: str, schemes: Iterable[AggregationScheme] = ALL_SCHEMES
) -> List[VideoVerdict]:
    """0.5 verdicts for a video with no detected faces at all."""
    return [VideoVerdict(video_id, AggregationScheme(s), DEFAULT_SCORE, defaulted=True) for s in schemes]


def parse_schemes(text: Optional[str]) -> Tuple[AggregationScheme, ...]:
    """
    Parse a `--scheme` value: one scheme name, a comma list, or "all".

    Raises:
        ValueError: On an unknown scheme name
    """
    if text is None or text.strip().lower() == "all":
        return ALL_SCHEMES
    return tuple(AggregationScheme.parse(part) for part in text.split(",") if part.strip())
