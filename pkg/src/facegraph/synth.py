"""
Synthetic detection manifests with ground truth.

A scenario places a number of identities and false detections into the
frames of one video and draws an embedding for every detection:

    embedding = normalize(mu_group + noise),  noise ~ N(0, sigma^2 / D * I)

so `noise_sigma` is the expected noise norm relative to the unit group
direction. Group directions are random unit vectors in R^D, which are nearly
orthogonal in high dimension. With `guaranteed_margin` the generator checks
that every within-group similarity exceeds `within_margin` and every
cross-group similarity stays below `cross_margin`, redrawing embeddings
until both hold.

Ground truth labels every record "identity:<k>" or "fp" and is written as a
sidecar, never into the manifest itself.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InfeasibleMargin, RecordId
from .model import DEFAULT_EMBEDDING_DIM, BBox, ComponentSet, FaceRecord
from .sampling import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_NOISE_SIGMA = 0.1
MAX_ATTEMPTS = 1000
FP_TRUTH = "fp"


def identity_truth(k: int) -> str:
    return f"identity:{k}"


@dataclass(frozen=True)
class ScoreDistribution:
    """Per-face fake score: constant when lo == hi, else uniform(lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError(f"score range ({self.lo}, {self.hi}) must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def constant(cls, value: float) -> "ScoreDistribution":
        return cls(value, value)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "ScoreDistribution":
        return cls(lo, hi)

    def sample(self, rng: np.random.Generator, n: int) -> List[float]:
        if self.lo == self.hi:
            return [self.lo] * n
        return rng.uniform(self.lo, self.hi, size=n).tolist()


@dataclass(frozen=True)
class IdentitySpec:
    """
    One person in the video.

    `presence` is the fraction of frames the person appears in, as one
    contiguous stretch at a random position.
    """

    presence: float = 1.0
    score: ScoreDistribution = ScoreDistribution.constant(0.5)

    def __post_init__(self):
        if not 0.0 < self.presence <= 1.0:
            raise ValueError(f"presence {self.presence} must be in (0, 1]")


class FalsePositiveMode(str, Enum):
    SCATTERED = "scattered"
    PERSISTENT = "persistent"


@dataclass(frozen=True)
class FalsePositiveSpec:
    """
    False detections in the video.

    scattered: each false positive has its own random direction and shows up
        in `occurrences` distinct random frames.
    persistent: each false positive shows up in every frame (a detector that
        repeats the same mistake).

    `identity_similarity`, when set, builds each false positive direction at
    that cosine from identity 0's direction instead of independently, which
    models partial faces and other near-face detections.
    """

    count: int = 0
    mode: FalsePositiveMode = FalsePositiveMode.SCATTERED
    occurrences: int = 1
    score: ScoreDistribution = ScoreDistribution.uniform(0.0, 1.0)
    identity_similarity: Optional[float] = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("false positive count must be >= 0")
        if self.occurrences < 1:
            raise ValueError("false positive occurrences must be >= 1")
        if self.identity_similarity is not None and not -1.0 < self.identity_similarity < 1.0:
            raise ValueError("identity_similarity must be in (-1, 1)")


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to generate one synthetic video."""

    n_frames: int
    identities: Tuple[IdentitySpec, ...] = ()
    fp_spec: FalsePositiveSpec = FalsePositiveSpec()
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    guaranteed_margin: bool = True
    video_id: str = "synth-0000"
    label: Optional[int] = None
    within_margin: float = 0.9
    cross_margin: float = 0.7
    frame_size: Tuple[float, float] = (1920.0, 1080.0)

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.embedding_dim < 2:
            raise ValueError("embedding_dim must be >= 2")
        if self.label not in (None, 0, 1):
            raise ValueError("label must be 0, 1 or None")


class GroundTruth(dict):
    """Record id -> "identity:<k>" or "fp"."""

    def true_face_ids(self, record_ids: Optional[Iterable[RecordId]] = None) -> set:
        ids = self.keys() if record_ids is None else record_ids
        return {rid for rid in ids if self[rid] != FP_TRUTH}

    def false_positive_ids(self) -> set:
        return {rid for rid, label in self.items() if label == FP_TRUTH}


@dataclass
class _Group:
    truth: str
    frames: List[int]
    score: ScoreDistribution
    near_identity: Optional[float] = None
    embeddings: List[Tuple[float, ...]] = field(default_factory=list)


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _layout(spec: ScenarioSpec, rng: np.random.Generator) -> List[_Group]:
    """Decide which frames every identity and false positive appears in."""
    n = spec.n_frames
    groups: List[_Group] = []
    for k, ident in enumerate(spec.identities):
        n_present = max(1, math.floor(ident.presence * n + 0.5))
        start = int(rng.integers(0, n - n_present + 1))
        groups.append(_Group(identity_truth(k), list(range(start, start + n_present)), ident.score))

    fp = spec.fp_spec
    near = fp.identity_similarity if spec.identities else None
    for _ in range(fp.count):
        if fp.mode is FalsePositiveMode.PERSISTENT:
            frames = list(range(n))
        else:
            m = min(fp.occurrences, n)
            frames = sorted(rng.choice(n, size=m, replace=False).tolist())
        groups.append(_Group(FP_TRUTH, frames, fp.score, near_identity=near))
    return groups


def _draw_embeddings(spec: ScenarioSpec, groups: List[_Group], rng: np.random.Generator) -> np.ndarray:
    dim = spec.embedding_dim
    scale = spec.noise_sigma / math.sqrt(dim)
    anchor = None
    rows = []
    for group in groups:
        if group.near_identity is not None and anchor is not None:
            # Direction at a fixed cosine from identity 0.
            orth = rng.standard_normal(dim)
            orth -= orth.dot(anchor) * anchor
            orth /= np.linalg.norm(orth)
            s = group.near_identity
            direction = s * anchor + math.sqrt(1.0 - s * s) * orth
        else:
            direction = _random_unit(rng, dim)
        if anchor is None and group.truth == identity_truth(0):
            anchor = direction
        for _ in group.frames:
            v = direction + rng.normal(0.0, scale, size=dim)
            rows.append(v / np.linalg.norm(v))
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)


def _margins_hold(spec: ScenarioSpec, groups: List[_Group], matrix: np.ndarray) -> bool:
    if matrix.shape[0] < 2:
        return True
    labels = np.repeat(np.arange(len(groups)), [len(g.frames) for g in groups])
    sims = matrix @ matrix.T
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(len(labels), dtype=bool)
    within = sims[same & off_diag]
    cross = sims[~same]
    if within.size and within.min() <= spec.within_margin:
        return False
    if cross.size and cross.max() >= spec.cross_margin:
        return False
    return True


def generate(spec: ScenarioSpec, max_attempts: int = MAX_ATTEMPTS) -> Tuple[List[FaceRecord], GroundTruth]:
    """
    Generate one synthetic video.

    Args:
        spec: Scenario description
        max_attempts: Embedding redraws allowed when checking margins

    Returns:
        Tuple of (records sorted by frame then face, ground truth)

    Raises:
        InfeasibleMargin: If margins still fail after max_attempts redraws
    """
    rng = np.random.default_rng(derive_seed(spec.seed, spec.video_id))
    groups = _layout(spec, rng)
    if not groups:
        return [], GroundTruth()

    for attempt in range(1, max_attempts + 1):
        matrix = _draw_embeddings(spec, groups, rng)
        if not spec.guaranteed_margin or _margins_hold(spec, groups, matrix):
            break
        logger.debug("%s: margin check failed on attempt %d", spec.video_id, attempt)
    else:
        raise InfeasibleMargin(max_attempts, spec.noise_sigma, spec.embedding_dim)

    # Slot every detection into its frame; faces in a frame are numbered in group order.
    detections: Dict[int, List[Tuple[int, int]]] = {}
    row = 0
    for g_index, group in enumerate(groups):
        for frame in group.frames:
            detections.setdefault(frame, []).append((g_index, row))
            row += 1

    width, height = spec.frame_size
    records: List[FaceRecord] = []
    truth = GroundTruth()
    for frame in sorted(detections):
        for face_index, (g_index, row) in enumerate(detections[frame]):
            group = groups[g_index]
            size = float(rng.uniform(80.0, 200.0))
            x0 = float(rng.uniform(0.0, width - size))
            y0 = float(rng.uniform(0.0, height - size))
            conf_lo = 0.9 if group.truth == FP_TRUTH else 0.95
            record = FaceRecord(
                video_id=spec.video_id,
                frame_index=frame,
                face_index=face_index,
                bbox=BBox(x0, y0, x0 + size, y0 + size),
                detector_confidence=float(rng.uniform(conf_lo, 1.0)),
                embedding=tuple(matrix[row].tolist()),
                score=group.score.sample(rng, 1)[0],
                video_label=spec.label,
            )
            records.append(record)
            truth[record.record_id] = group.truth
    return records, truth


def generate_suite(specs: Sequence[ScenarioSpec]) -> Tuple[List[FaceRecord], GroundTruth]:
    """Generate several videos into one record list and one ground truth."""
    video_ids = [s.video_id for s in specs]
    if len(set(video_ids)) != len(video_ids):
        raise ValueError("scenario video_ids must be unique")
    records: List[FaceRecord] = []
    truth = GroundTruth()
    for spec in specs:
        video_records, video_truth = generate(spec)
        records.extend(video_records)
        truth.update(video_truth)
    return records, truth


def benchmark_specs(
    n_videos: int = 200,
    seed: int = 0,
    n_frames: int = 8,
    fake_fraction: float = 0.5,
    multi_face_fraction: float = 0.5,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    embedding_dim: int = DEFAULT_EMBEDDING_DIM,
    fp_count: int = 0,
    fp_occurrences: int = 1,
    fp_identity_similarity: Optional[float] = None,
    secondary_presence: float = 1.0,
    real_score: Tuple[float, float] = (0.0, 0.2),
    fake_score: Tuple[float, float] = (0.8, 1.0),
    fp_score: Tuple[float, float] = (0.0, 1.0),
    prefix: str = "synth",
) -> List[ScenarioSpec]:
    """
    A labeled batch of scenarios for aggregation and sweep experiments.

    Fake videos are `fake_fraction` of the batch. A `multi_face_fraction`
    share of videos holds two people: an anchor present in every frame and
    a secondary person present in `secondary_presence` of the frames. In
    fake two-person videos only the secondary person is manipulated; in
    fake one-person videos the single person is. Unmanipulated faces score
    in `real_score`, manipulated faces in `fake_score`.

    False positives are scattered; with `fp_identity_similarity` they are
    near-face detections close to the anchor, and margins are not enforced.
    """
    rng = np.random.default_rng(seed)
    n_fake = int(round(n_videos * fake_fraction))
    labels = np.array([1] * n_fake + [0] * (n_videos - n_fake))
    rng.shuffle(labels)

    low = ScoreDistribution.uniform(*real_score)
    high = ScoreDistribution.uniform(*fake_score)
    fp_spec = FalsePositiveSpec(
        count=fp_count,
        occurrences=fp_occurrences,
        score=ScoreDistribution.uniform(*fp_score),
        identity_similarity=fp_identity_similarity,
    )

    specs = []
    for v, label in enumerate(labels.tolist()):
        two_faces = bool(rng.random() < multi_face_fraction)
        if two_faces:
            identities = (
                IdentitySpec(1.0, low),
                IdentitySpec(secondary_presence, high if label == 1 else low),
            )
        else:
            identities = (IdentitySpec(1.0, high if label == 1 else low),)
        specs.append(
            ScenarioSpec(
                n_frames=n_frames,
                identities=identities,
                fp_spec=fp_spec,
                noise_sigma=noise_sigma,
                seed=int(rng.integers(0, 2**31 - 1)),
                embedding_dim=embedding_dim,
                guaranteed_margin=fp_identity_similarity is None,
                video_id=f"{prefix}-{v:04d}",
                label=label,
            )
        )
    return specs


def score_cleaning(component_set: ComponentSet, truth: GroundTruth) -> Tuple[float, float]:
    """
    Precision and recall of the kept records against ground truth.

    precision = |kept & true faces| / |kept|  (1.0 when nothing is kept)
    recall    = |kept & true faces| / |true faces|  (1.0 when there are none)
    """
    all_ids = [rid for c in component_set.components for rid in c.member_ids]
    true_faces = truth.true_face_ids(all_ids)
    kept = set(component_set.kept_ids)
    hits = len(kept & true_faces)
    precision = hits / len(kept) if kept else 1.0
    recall = hits / len(true_faces) if true_faces else 1.0
    return precision, recall
