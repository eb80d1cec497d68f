"""Synthetic data and frame-planning tools."""

from pathlib import Path
from typing import Optional

from mcp.types import ToolAnnotations

from ..clients import face_mcp
from ..config import resolve_seed
from ..manifest_io import ManifestHeader, write_manifest, write_truth
from ..sampling import plan_frames
from ..synth import benchmark_specs, generate_suite
from ..utils import handle_tool_errors


@face_mcp.tool(annotations=ToolAnnotations(readOnlyHint=False, idempotentHint=True))
@handle_tool_errors
async def generate_synthetic(
    output_path: str,
    truth_path: Optional[str] = None,
    n_videos: int = 20,
    n_frames: int = 8,
    noise: float = 0.1,
    fp_count: int = 2,
    fp_occurrences: int = 1,
    secondary_presence: float = 1.0,
    embedding_dim: int = 512,
    seed: Optional[int] = None,
) -> str:
    """
    Write a labeled synthetic manifest with known identities and false positives.

    Parameters:
    - output_path: Where to write the manifest
    - truth_path: Optional ground-truth sidecar ("identity:<k>" or "fp" per record)
    - n_videos: Number of videos, half fake (default: 20)
    - n_frames: Frames per video (default: 8)
    - noise: Embedding noise norm relative to the identity direction (default: 0.1)
    - fp_count: Scattered false positives per video (default: 2)
    - fp_occurrences: Frames each false positive appears in (default: 1)
    - secondary_presence: Presence fraction of the second person in two-person videos
    - embedding_dim: Embedding dimension (default: 512)
    - seed: Random seed (default: FACEGRAPH_SEED or 0)

    Returns: Summary line with video and record counts
    """
    specs = benchmark_specs(
        n_videos=n_videos,
        seed=resolve_seed(seed),
        n_frames=n_frames,
        noise_sigma=noise,
        embedding_dim=embedding_dim,
        fp_count=fp_count,
        fp_occurrences=fp_occurrences,
        secondary_presence=secondary_presence,
    )
    records, truth = generate_suite(specs)
    with open(Path(output_path), "w", encoding="utf-8", newline="") as stream:
        rows = write_manifest(ManifestHeader(embedding_dim=embedding_dim), records, stream)
    if truth_path:
        with open(Path(truth_path), "w", encoding="utf-8", newline="") as stream:
            write_truth(truth, stream)
    return f"Wrote {len(specs)} videos, {rows} records to {output_path}"


@face_mcp.tool(annotations=ToolAnnotations(readOnlyHint=True))
@handle_tool_errors
async def plan_frame_indices(total_frames: int, fps_source: float, rate: float = 4.0) -> str:
    """
    Frame indices to decode when sampling a video uniformly at `rate` fps.

    Example: plan_frame_indices(300, 30, 4) -> "0,8,15,23,30,..."

    Returns: Comma-separated frame indices
    """
    plan = plan_frames(total_frames, fps_source, rate)
    return ",".join(str(i) for i in plan.frame_indices)
