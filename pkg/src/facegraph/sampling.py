"""
Deterministic planners for the sampling steps around face extraction.

- plan_frames: uniform frame selection at a target rate
- expand_bbox: enlarge a face box about its center, clamped to the frame
- plan_balanced_faces: per-epoch class-balanced face sampling (16 real / 4 fake)
"""

import hashlib
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, TypeVar

import numpy as np

from .model import BBox

T = TypeVar("T")

DEFAULT_RATE = 4.0
DEFAULT_BBOX_FACTOR = 1.3
REAL_QUOTA = 16
FAKE_QUOTA = 4


@dataclass(frozen=True)
class FramePlan:
    """Frame indices selected from one video."""

    frame_indices: Tuple[int, ...]
    source_fps: float
    target_rate: float

    def __len__(self) -> int:
        return len(self.frame_indices)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def plan_frames(total_frames: int, source_fps: float, target_rate: float = DEFAULT_RATE) -> FramePlan:
    """
    Select frames uniformly at `target_rate` frames per second.

    Index k maps to round_half_up(k * source_fps / target_rate); indices at
    or beyond total_frames are dropped. A target rate at or above the source
    rate selects every frame.

    Example:
        >>> plan_frames(300, 30, 4).frame_indices[:5]
        (0, 8, 15, 23, 30)
    """
    if total_frames < 0:
        raise ValueError("total_frames must be >= 0")
    if source_fps <= 0 or target_rate <= 0:
        raise ValueError("source_fps and target_rate must be positive")

    if target_rate >= source_fps:
        return FramePlan(tuple(range(total_frames)), source_fps, target_rate)

    indices: List[int] = []
    k = 0
    while True:
        index = _round_half_up(k * source_fps / target_rate)
        if index >= total_frames:
            break
        if not indices or index > indices[-1]:
            indices.append(index)
        k += 1
    return FramePlan(tuple(indices), source_fps, target_rate)


def expand_bbox(
    bbox: BBox,
    factor: float = DEFAULT_BBOX_FACTOR,
    frame_w: float = math.inf,
    frame_h: float = math.inf,
) -> BBox:
    """
    Scale a bbox's width and height by `factor` about its center, then clamp
    it to [0, frame_w] x [0, frame_h].

    Raises:
        ValueError: If factor < 1
    """
    if factor < 1.0:
        raise ValueError(f"bbox factor must be >= 1, got {factor}")
    cx, cy = bbox.center
    half_w = bbox.width * factor / 2
    half_h = bbox.height * factor / 2
    return BBox(
        max(0.0, cx - half_w),
        max(0.0, cy - half_h),
        min(frame_w, cx + half_w),
        min(frame_h, cy + half_h),
    )


def derive_seed(global_seed: int, video_id: str, epoch: int = 0) -> np.random.SeedSequence:
    """
    Seed material for one (run, video, epoch).

    The video id enters as the first 8 bytes of its SHA-256 digest, so the
    derivation is stable across processes and platforms (unlike hash()).
    """
    digest = hashlib.sha256(video_id.encode("utf-8")).digest()
    video_key = int.from_bytes(digest[:8], "big")
    return np.random.SeedSequence([global_seed & 0xFFFFFFFFFFFFFFFF, video_key, epoch])


def plan_balanced_faces(
    label: int,
    available: Sequence[T],
    seed: int = 0,
    video_id: str = "",
    epoch: int = 0,
    real_quota: int = REAL_QUOTA,
    fake_quota: int = FAKE_QUOTA,
) -> List[T]:
    """
    Pick the faces of one video used for training in one epoch.

    Draws min(quota, len(available)) faces uniformly without replacement,
    with quota = 16 for real (label 0) and 4 for fake (label 1) videos. The
    generator is PCG64 seeded from (seed, video_id, epoch); the chosen faces
    are returned in their original order.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 (real) or 1 (fake), got {label!r}")
    quota = real_quota if label == 0 else fake_quota
    size = min(quota, len(available))
    if size == len(available):
        return list(available)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, video_id, epoch)))
    chosen = sorted(rng.choice(len(available), size=size, replace=False).tolist())
    return [available[i] for i in chosen]
