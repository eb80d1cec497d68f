"""Cleaning and aggregation tools over manifest files."""

from pathlib import Path
from typing import Optional

from mcp.types import ToolAnnotations

from .. import formatters, pipeline
from ..clients import face_mcp
from ..config import RunConfig
from ..manifest_io import write_manifest
from ..utils import build_params, handle_tool_errors


@face_mcp.tool(annotations=ToolAnnotations(readOnlyHint=False, idempotentHint=True))
@handle_tool_errors
async def clean_manifest(
    manifest_path: str,
    output_path: str,
    theta: float = 0.8,
    size_frac: str = "1/2",
    min_conf: float = 0.0,
    jobs: Optional[int] = None,
) -> str:
    """
    Remove face-detection false positives from a detection manifest.

    Builds a face graph per video (edges between faces whose embedding
    similarity exceeds theta), flags connected components of size
    <= N_F * size_frac as pruned, and writes the manifest annotated with
    `component` and `kept` fields to output_path.

    Parameters:
    - manifest_path: Input JSONL manifest with embeddings
    - output_path: Where to write the annotated manifest
    - theta: Similarity threshold (default: 0.8)
    - size_frac: Size threshold as a fraction of N_F, e.g. "1/2" (default)
    - min_conf: Drop detections below this detector confidence first
    - jobs: Parallel workers (default: CPU count)

    Returns: Component report CSV with columns video_id, K, N_F, components, kept, pruned
    """
    config = RunConfig.build(
        **build_params(theta=theta, size_fraction=size_frac, jobs=jobs),
        min_confidence=min_conf,
        input_path=Path(manifest_path),
        output_path=Path(output_path),
    )
    header, groups = pipeline.load_manifest_file(config.input_path, config.min_confidence)
    component_sets = await pipeline.clean_groups(groups, config)
    with open(config.output_path, "w", encoding="utf-8", newline="") as stream:
        write_manifest(
            header,
            (r for g, cs in zip(groups, component_sets) for r in pipeline.annotate_records(g, cs)),
            stream,
        )
    return formatters.component_report_csv(component_sets)


@face_mcp.tool(annotations=ToolAnnotations(readOnlyHint=True))
@handle_tool_errors
async def aggregate_manifest(
    manifest_path: str,
    scheme: str = "face",
    theta: float = 0.8,
    size_frac: str = "1/2",
    no_clean: bool = False,
    labels_path: Optional[str] = None,
    jobs: Optional[int] = None,
) -> str:
    """
    Collapse per-face fake probabilities into one verdict per video.

    Uses the clean-stage annotations when present, otherwise cleans in
    place. Schemes: avg, median, max, face (mean per component, then max),
    a comma list, or "all".

    Parameters:
    - manifest_path: Manifest with per-face scores
    - scheme: Aggregation scheme(s) (default: face)
    - theta, size_frac: Cleaning thresholds for unannotated manifests
    - no_clean: Baseline mode, aggregate every face
    - labels_path: Labels; labeled videos without faces get a 0.5 verdict
    - jobs: Parallel workers (default: CPU count)

    Returns: Verdict CSV with columns video_id, scheme, score, defaulted
    """
    config = RunConfig.build(
        **build_params(theta=theta, size_fraction=size_frac, jobs=jobs),
        schemes=scheme,
        no_clean=no_clean,
        input_path=Path(manifest_path),
    )
    _, groups = pipeline.load_manifest_file(config.input_path, config.min_confidence)
    labels = None
    if labels_path:
        labels = pipeline.parse_labels(Path(labels_path).read_text(encoding="utf-8"))
    verdicts, _ = await pipeline.aggregate_groups(groups, config, labels=labels)
    return formatters.verdicts_to_csv(verdicts)
