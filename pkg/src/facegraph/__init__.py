"""Face-graph pre-processing and video-level aggregation for face-based video classifiers."""

from .server import run

__all__ = ["run"]
