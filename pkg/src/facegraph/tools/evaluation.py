"""Evaluation and threshold-sweep tools."""

from pathlib import Path
from typing import Literal, Optional

from mcp.types import ToolAnnotations

from .. import formatters, pipeline
from ..clients import face_mcp
from ..config import resolve_jobs, resolve_seed
from ..utils import handle_tool_errors


@face_mcp.tool(annotations=ToolAnnotations(readOnlyHint=True))
@handle_tool_errors
async def evaluate_verdicts(
    verdicts_csv: str,
    labels_path: str,
    balance: bool = False,
    seed: Optional[int] = None,
) -> str:
    """
    Score video verdicts against ground-truth labels.

    Parameters:
    - verdicts_csv: Verdict CSV text (as returned by aggregate_manifest)
    - labels_path: `video_id,label` CSV or a labeled manifest
    - balance: Randomly subsample the majority class first
    - seed: Seed for balancing (default: FACEGRAPH_SEED or 0)

    Returns: JSON with log_loss, accuracy, macro_f1 and n_videos, keyed by
    scheme when the CSV holds more than one scheme.
    Note: constant 0.5 verdicts give log_loss ln 2 = 0.693.
    """
    verdicts = formatters.read_verdicts_csv(verdicts_csv)
    labels = pipeline.parse_labels(Path(labels_path).read_text(encoding="utf-8"))
    results = pipeline.evaluate_verdicts(verdicts, labels, balance=balance, seed=resolve_seed(seed))
    payload = next(iter(results.values())) if len(results) == 1 else results
    return formatters.metrics_to_json(payload)


@face_mcp.tool(annotations=ToolAnnotations(readOnlyHint=True))
@handle_tool_errors
async def sweep_thresholds(
    manifest_path: str,
    thetas: str = "0.7,0.8,0.9",
    fracs: str = "1/4,1/2,3/4",
    labels_path: Optional[str] = None,
    output_format: Literal["csv", "text"] = "csv",
    jobs: Optional[int] = None,
) -> str:
    """
    Clean, aggregate with the Face scheme and evaluate over a threshold grid.

    Parameters:
    - manifest_path: Manifest with embeddings, scores and labels
    - thetas: Comma-separated similarity thresholds
    - fracs: Comma-separated size fractions, e.g. "1/4,1/2,3/4"
    - labels_path: Labels file (default: labels in the manifest)
    - output_format: 'csv' long table (default) or 'text' log-loss grid
    - jobs: Parallel workers (default: CPU count)

    Returns: theta, size_frac, log_loss, accuracy, macro_f1, n_videos per grid cell
    """
    theta_values = [float(t) for t in thetas.split(",") if t.strip()]
    frac_values = [f.strip() for f in fracs.split(",") if f.strip()]
    _, groups = pipeline.load_manifest_file(manifest_path)
    if labels_path:
        labels = pipeline.parse_labels(Path(labels_path).read_text(encoding="utf-8"))
    else:
        labels = pipeline.labels_from_records(r for g in groups for r in g.records)
    frame = await pipeline.run_sweep(groups, labels, theta_values, frac_values, jobs=resolve_jobs(jobs))
    if output_format == "text":
        return formatters.sweep_grid_text(frame)
    return formatters.sweep_to_csv(frame)
