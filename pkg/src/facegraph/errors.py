"""
Exception hierarchy for the face-graph pipeline.

Every error raised on purpose by the package derives from FaceGraphError so
that callers (the CLI, the tool server) can map them to exit codes or error
strings in one place.
"""

from typing import Optional, Tuple

RecordId = Tuple[str, int, int]


def _format_record_id(record_id: RecordId) -> str:
    video_id, frame_index, face_index = record_id
    return f"{video_id}/frame={frame_index}/face={face_index}"


class FaceGraphError(Exception):
    """Base class for all pipeline errors."""

    pass


class ZeroVector(FaceGraphError):
    """Raised when an embedding has no direction (all values are zero)."""

    def __init__(self, record_id: Optional[RecordId] = None):
        self.record_id = record_id
        where = f" for {_format_record_id(record_id)}" if record_id else ""
        super().__init__(f"Embedding is an all-zero vector{where}")


class ParseError(FaceGraphError):
    """Raised when a manifest line cannot be parsed or fails validation."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DimensionMismatch(FaceGraphError):
    """Raised when an embedding length differs from the declared dimension."""

    def __init__(self, expected: int, actual: int, line_no: Optional[int] = None):
        self.expected = expected
        self.actual = actual
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(
            f"{prefix}embedding has {actual} values, expected {expected}"
        )


class DuplicateRecord(FaceGraphError):
    """Raised when the (video_id, frame, face) triple repeats."""

    def __init__(self, record_id: RecordId):
        self.record_id = record_id
        super().__init__(f"Duplicate record {_format_record_id(record_id)}")


class UnsortedInput(FaceGraphError):
    """Raised in streaming grouping mode when a video reappears."""

    def __init__(self, video_id: str):
        self.video_id = video_id
        super().__init__(
            f"Video '{video_id}' reappears after other videos; "
            "input is not sorted by video_id"
        )


class MissingEmbedding(FaceGraphError):
    """Raised when the face graph needs an embedding a record does not have."""

    def __init__(self, record_id: RecordId, line_no: Optional[int] = None):
        self.record_id = record_id
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{prefix}Record {_format_record_id(record_id)} has no embedding")


class MissingScore(FaceGraphError):
    """Raised when a kept record has no fake-probability score."""

    def __init__(self, record_id: RecordId):
        self.record_id = record_id
        super().__init__(f"Kept record {_format_record_id(record_id)} has no score")


class EmptyInput(FaceGraphError):
    """Raised when a metric is asked to summarize zero items."""

    pass


class LabelMismatch(FaceGraphError):
    """Raised when verdicts and labels do not cover the same videos."""

    def __init__(self, video_ids, reason: str):
        self.video_ids = sorted(video_ids)
        shown = ", ".join(self.video_ids[:5])
        more = "" if len(self.video_ids) <= 5 else f" (+{len(self.video_ids) - 5} more)"
        super().__init__(f"{reason}: {shown}{more}")


class InfeasibleMargin(FaceGraphError):
    """Raised when the synthetic generator cannot satisfy its margins."""

    def __init__(self, attempts: int, noise_sigma: float, embedding_dim: int):
        self.attempts = attempts
        super().__init__(
            f"Could not satisfy similarity margins after {attempts} attempts "
            f"(noise_sigma={noise_sigma}, embedding_dim={embedding_dim})"
        )
