"""Shared builders for test fixtures."""

from pathlib import Path
from typing import Iterable, Optional, Sequence

from facegraph.manifest_io import ManifestHeader, write_manifest
from facegraph.model import BBox, FaceRecord

DIM = 4


def axis(index: int, jitter: float = 0.0, dim: int = DIM) -> tuple:
    """Unit-ish vector along `index`, nudged by `jitter` on the next axis."""
    values = [0.0] * dim
    values[index % dim] = 1.0
    values[(index + 1) % dim] = jitter
    return tuple(values)


def make_record(
    video_id: str,
    frame: int,
    face: int = 0,
    embedding: Optional[Sequence[float]] = None,
    score: Optional[float] = None,
    label: Optional[int] = None,
    conf: float = 0.99,
    component: Optional[int] = None,
    kept: Optional[bool] = None,
) -> FaceRecord:
    return FaceRecord(
        video_id=video_id,
        frame_index=frame,
        face_index=face,
        bbox=BBox(10.0, 20.0, 110.0, 140.0),
        detector_confidence=conf,
        embedding=tuple(embedding) if embedding is not None else None,
        score=score,
        video_label=label,
        component=component,
        kept=kept,
    )


def two_person_video(video_id: str = "v1", label: Optional[int] = 1) -> list:
    """
    Two people in frames 0 and 1.

    Person A scores 0.9 and 0.7, person B scores 0.1 and 0.2, so the video
    aggregates to Face 0.8, Avg 0.475, Median 0.45, Max 0.9.
    """
    return [
        make_record(video_id, 0, 0, axis(0, 0.01), 0.9, label),
        make_record(video_id, 0, 1, axis(2, 0.01), 0.1, label),
        make_record(video_id, 1, 0, axis(0, 0.02), 0.7, label),
        make_record(video_id, 1, 1, axis(2, 0.02), 0.2, label),
    ]


def scattered_video(video_id: str = "v2", label: Optional[int] = 0) -> list:
    """Four frames, each with a different face: every component is pruned."""
    return [make_record(video_id, f, 0, axis(f), 0.3, label) for f in range(4)]


def write_manifest_file(path: Path, records: Iterable[FaceRecord], dim: int = DIM) -> Path:
    with open(path, "w", encoding="utf-8") as stream:
        write_manifest(ManifestHeader(embedding_dim=dim), records, stream)
    return path
