"""
Core domain types shared by every stage of the pipeline.

All types are frozen dataclasses (immutable after construction) so they can
be handed to worker threads without copying. Embeddings are stored as plain
tuples of floats; numeric work converts them to numpy arrays on demand.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import FrozenSet, Optional, Sequence, Tuple

import numpy as np

from .errors import RecordId, ZeroVector

Embedding = Tuple[float, ...]

DEFAULT_EMBEDDING_DIM = 512
NORM_TOLERANCE = 1e-6


def normalize_embedding(
    values: Sequence[float], record_id: Optional[RecordId] = None
) -> Embedding:
    """
    Scale an embedding to unit L2 norm, preserving its direction.

    Args:
        values: Embedding values
        record_id: Optional record identity, used only in the error message

    Returns:
        Unit-norm embedding as a tuple of floats

    Raises:
        ZeroVector: If every value is zero
    """
    vector = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ZeroVector(record_id)
    if abs(norm - 1.0) <= NORM_TOLERANCE / 10:
        # Already unit length; return the input unchanged so normalize is idempotent.
        return tuple(float(v) for v in vector)
    return tuple(float(v) for v in vector / norm)


@dataclass(frozen=True)
class BBox:
    """Face bounding box in pixel coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(
                f"Invalid bbox ({self.x0}, {self.y0}, {self.x1}, {self.y1}): "
                "requires x1 > x0 and y1 > y0"
            )

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def as_list(self) -> list:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class FaceRecord:
    """
    One detected face.

    `component` and `kept` are only present on cleaned manifests; they carry
    the face-graph result from the clean stage to later stages. `line_no` is
    the manifest line the record was read from, for error messages only.
    """

    video_id: str
    frame_index: int
    face_index: int
    bbox: BBox
    detector_confidence: float
    embedding: Optional[Embedding] = None
    score: Optional[float] = None
    video_label: Optional[int] = None
    component: Optional[int] = None
    kept: Optional[bool] = None
    line_no: Optional[int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.frame_index < 0 or self.face_index < 0:
            raise ValueError("frame and face indices must be non-negative")
        if not 0.0 <= self.detector_confidence <= 1.0:
            raise ValueError(
                f"detector confidence {self.detector_confidence} outside [0, 1]"
            )
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.video_label is not None and self.video_label not in (0, 1):
            raise ValueError(f"label {self.video_label} is not 0 (real) or 1 (fake)")

    @property
    def record_id(self) -> RecordId:
        return (self.video_id, self.frame_index, self.face_index)

    def with_annotation(self, component: int, kept: bool) -> "FaceRecord":
        return replace(self, component=component, kept=kept)


@dataclass(frozen=True)
class VideoGroup:
    """All face records of one video, sorted by (frame_index, face_index)."""

    video_id: str
    records: Tuple[FaceRecord, ...]
    n_f: int

    @classmethod
    def from_records(cls, video_id: str, records: Sequence[FaceRecord]) -> "VideoGroup":
        ordered = tuple(sorted(records, key=lambda r: (r.frame_index, r.face_index)))
        n_f = len({r.frame_index for r in ordered})
        return cls(video_id=video_id, records=ordered, n_f=n_f)

    @property
    def record_ids(self) -> Tuple[RecordId, ...]:
        return tuple(r.record_id for r in self.records)

    @property
    def label(self) -> Optional[int]:
        """First label found among the records, if any."""
        for record in self.records:
            if record.video_label is not None:
                return record.video_label
        return None

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SimilarityThreshold:
    """Edge threshold on embedding similarity."""

    theta: float = 0.8

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError(f"theta {self.theta} outside [-1, 1]")

    @classmethod
    def coerce(cls, value) -> "SimilarityThreshold":
        if isinstance(value, cls):
            return value
        return cls(float(value))

    def __float__(self) -> float:
        return self.theta


@dataclass(frozen=True)
class SizeFraction:
    """
    Component-size threshold as a fraction of N_F.

    Kept as an integer ratio so the pruning rule never does float division.
    """

    numerator: int = 1
    denominator: int = 2

    def __post_init__(self):
        if self.numerator <= 0 or self.denominator <= 0:
            raise ValueError("size fraction terms must be positive integers")
        if self.numerator > self.denominator:
            raise ValueError(
                f"size fraction {self.numerator}/{self.denominator} exceeds 1"
            )

    @classmethod
    def parse(cls, text: str) -> "SizeFraction":
        """
        Parse the flag form, e.g. "1/2" or "3/4". A bare "1" means 1/1.

        Raises:
            ValueError: If the text is not a positive ratio <= 1
        """
        text = text.strip()
        if "/" in text:
            num, _, den = text.partition("/")
            try:
                return cls(int(num), int(den))
            except ValueError as e:
                raise ValueError(f"Invalid size fraction '{text}': {e}") from e
        try:
            return cls(int(text), 1)
        except ValueError as e:
            raise ValueError(f"Invalid size fraction '{text}': {e}") from e

    @classmethod
    def coerce(cls, value) -> "SizeFraction":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, Fraction):
            return cls(value.numerator, value.denominator)
        if isinstance(value, tuple):
            return cls(*value)
        raise TypeError(f"Cannot interpret {value!r} as a size fraction")

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class Component:
    """A connected component of a face graph."""

    member_ids: FrozenSet[RecordId]
    size: int
    kept: bool = True

    def __post_init__(self):
        if self.size != len(self.member_ids) or self.size < 1:
            raise ValueError("component size must equal its member count and be >= 1")

    @classmethod
    def of(cls, member_ids, kept: bool = True) -> "Component":
        members = frozenset(member_ids)
        return cls(member_ids=members, size=len(members), kept=kept)

    @property
    def min_member(self) -> RecordId:
        return min(self.member_ids)

    def sorted_members(self) -> Tuple[RecordId, ...]:
        return tuple(sorted(self.member_ids))


@dataclass(frozen=True)
class ComponentSet:
    """Partition of one video's records into kept and pruned components."""

    video_id: str
    components: Tuple[Component, ...]
    n_f: int
    theta: Optional[float]
    size_fraction: Optional[SizeFraction] = field(default=None)

    @property
    def kept_components(self) -> Tuple[Component, ...]:
        return tuple(c for c in self.components if c.kept)

    @property
    def pruned_components(self) -> Tuple[Component, ...]:
        return tuple(c for c in self.components if not c.kept)

    @property
    def kept_ids(self) -> Tuple[RecordId, ...]:
        return tuple(sorted(rid for c in self.kept_components for rid in c.member_ids))

    @property
    def n_records(self) -> int:
        return sum(c.size for c in self.components)


class AggregationScheme(str, Enum):
    """Rule that collapses per-face scores into one video verdict."""

    AVG = "avg"
    MEDIAN = "median"
    MAX = "max"
    FACE = "face"

    @classmethod
    def parse(cls, text: str) -> "AggregationScheme":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"Unknown aggregation scheme '{text}' (expected {valid})")


@dataclass(frozen=True)
class VideoVerdict:
    """Video-level fake probability under one aggregation scheme."""

    video_id: str
    scheme: AggregationScheme
    score: float
    defaulted: bool = False

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"verdict score {self.score} outside [0, 1]")
        if self.defaulted and self.score != 0.5:
            raise ValueError("defaulted verdicts must carry score 0.5")
