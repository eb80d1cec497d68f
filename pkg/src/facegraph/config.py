"""Run configuration shared by the CLI and the tool server."""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

from .aggregation import parse_schemes
from .model import AggregationScheme, SimilarityThreshold, SizeFraction

logger = logging.getLogger(__name__)

SEED_ENV = "FACEGRAPH_SEED"
JOBS_ENV = "FACEGRAPH_JOBS"

DEFAULT_THETA = 0.8
DEFAULT_SIZE_FRACTION = SizeFraction(1, 2)
DEFAULT_SWEEP_THETAS: Tuple[float, ...] = (0.7, 0.8, 0.9)
DEFAULT_SWEEP_FRACS: Tuple[SizeFraction, ...] = (
    SizeFraction(1, 4),
    SizeFraction(1, 2),
    SizeFraction(3, 4),
)


def _env_int(name: str) -> Optional[int]:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer", name, raw)
        return None


def resolve_seed(seed: Optional[int] = None) -> int:
    """Explicit seed, else FACEGRAPH_SEED, else 0."""
    if seed is not None:
        return seed
    env_seed = _env_int(SEED_ENV)
    return env_seed if env_seed is not None else 0


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Explicit worker count, else FACEGRAPH_JOBS, else the CPU count."""
    if jobs is None:
        jobs = _env_int(JOBS_ENV)
    if jobs is None:
        jobs = os.cpu_count() or 1
    return max(1, jobs)


@dataclass(frozen=True)
class RunConfig:
    """
    Settings for one pipeline run.

    Defaults are the operating point used throughout: theta 0.8, prune
    components of size <= N_F / 2, Face aggregation. `min_confidence` gates
    detections when the manifest is loaded; `schemes` are the aggregation
    schemes reported, in order. A None input or output path means stdin or
    stdout.
    """

    theta: SimilarityThreshold = SimilarityThreshold(DEFAULT_THETA)
    size_fraction: SizeFraction = DEFAULT_SIZE_FRACTION
    schemes: Tuple[AggregationScheme, ...] = (AggregationScheme.FACE,)
    seed: int = 0
    jobs: int = field(default_factory=resolve_jobs)
    no_clean: bool = False
    min_confidence: float = 0.0
    input_path: Optional[Path] = None
    output_path: Optional[Path] = None

    def __post_init__(self):
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError(f"min_confidence {self.min_confidence} outside [0, 1]")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if not self.schemes:
            raise ValueError("at least one aggregation scheme is required")

    @classmethod
    def build(
        cls,
        theta: float = DEFAULT_THETA,
        size_fraction="1/2",
        schemes: Union[str, Sequence[AggregationScheme]] = "face",
        seed: Optional[int] = None,
        jobs: Optional[int] = None,
        **kwargs,
    ) -> "RunConfig":
        """Build a config from raw flag values, applying env fallbacks."""
        return cls(
            theta=SimilarityThreshold.coerce(theta),
            size_fraction=SizeFraction.coerce(size_fraction),
            schemes=parse_schemes(schemes) if isinstance(schemes, str) else tuple(schemes),
            seed=resolve_seed(seed),
            jobs=resolve_jobs(jobs),
            **kwargs,
        )
