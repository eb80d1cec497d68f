"""
Command-line entry point.

    facegraph clean     manifest -> annotated manifest (+ component report)
    facegraph aggregate cleaned manifest -> verdict CSV
    facegraph evaluate  verdict CSV + labels -> metrics JSON
    facegraph sweep     manifest -> metrics over a theta x size-fraction grid
    facegraph synth     synthetic manifest + ground-truth sidecar
    facegraph sample    per-epoch balanced training faces
    facegraph frames    frame indices for uniform sampling

Data goes to -o files or stdout; diagnostics go to stderr.
"""

import asyncio
import contextlib
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import BinaryIO, Dict, Iterator, List, Optional, TextIO, Tuple

import typer
from rich.console import Console
from rich.logging import RichHandler

from . import formatters
from .aggregation import parse_schemes
from .config import RunConfig, resolve_seed
from .errors import (
    DimensionMismatch,
    DuplicateRecord,
    EmptyInput,
    FaceGraphError,
    InfeasibleMargin,
    LabelMismatch,
    MissingEmbedding,
    MissingScore,
    ParseError,
    UnsortedInput,
    ZeroVector,
)
from .manifest_io import ManifestHeader, write_manifest, write_truth
from .model import SizeFraction, VideoGroup
from .pipeline import (
    aggregate_groups,
    annotate_records,
    clean_groups,
    evaluate_verdicts,
    face_prediction_rows,
    labels_from_records,
    load_groups,
    parse_labels,
    run_sweep,
    sample_training_faces,
)
from .sampling import DEFAULT_BBOX_FACTOR, DEFAULT_RATE, plan_frames
from .synth import benchmark_specs, generate_suite

logger = logging.getLogger(__name__)

EXIT_BAD_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_FAILURE = 1

BAD_INPUT_ERRORS = (ParseError, DimensionMismatch, DuplicateRecord, UnsortedInput, ZeroVector, UnicodeDecodeError)
PRECONDITION_ERRORS = (MissingEmbedding, MissingScore, LabelMismatch, EmptyInput, InfeasibleMargin)

app = typer.Typer(
    name="facegraph",
    help="Face-graph cleaning, aggregation and evaluation for face-based video classifiers.",
    no_args_is_help=True,
    add_completion=False,
)


def configure_logging(verbose: bool = False) -> None:
    """Route all logging to a rich handler on stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def exit_on_error(func):
    """
    Map pipeline errors to exit codes.

    2 for malformed input, 3 for unmet preconditions, 1 for any other
    pipeline error. Cancellation and interrupts propagate untouched.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except asyncio.CancelledError:
            raise
        except BAD_INPUT_ERRORS as e:
            logger.error("%s: %s", type(e).__name__, e)
            raise typer.Exit(EXIT_BAD_INPUT)
        except PRECONDITION_ERRORS as e:
            logger.error("%s: %s", type(e).__name__, e)
            raise typer.Exit(EXIT_PRECONDITION)
        except FaceGraphError as e:
            logger.error("%s: %s", type(e).__name__, e)
            raise typer.Exit(EXIT_FAILURE)

    return wrapper


# --- option helpers ------------------------------------------------------


def _parse_size_fraction(value: str) -> SizeFraction:
    try:
        return SizeFraction.parse(value)
    except ValueError as e:
        raise typer.BadParameter(str(e))


def _parse_scheme_list(value: str):
    try:
        schemes = parse_schemes(value)
    except ValueError as e:
        raise typer.BadParameter(str(e))
    if not schemes:
        raise typer.BadParameter("at least one scheme is required")
    return schemes


def _parse_float_list(value: str) -> List[float]:
    try:
        values = [float(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated numbers: {e}")
    if not values or any(not -1.0 <= v <= 1.0 for v in values):
        raise typer.BadParameter("thresholds must be numbers in [-1, 1]")
    return values


def _parse_fraction_list(value: str) -> List[SizeFraction]:
    fracs = [_parse_size_fraction(part) for part in value.split(",") if part.strip()]
    if not fracs:
        raise typer.BadParameter("at least one size fraction is required")
    return fracs


@contextlib.contextmanager
def _open_input(path: Optional[Path]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdin
    else:
        with open(path, "r", encoding="utf-8") as stream:
            yield stream


@contextlib.contextmanager
def _open_manifest(path: Optional[Path]) -> Iterator[BinaryIO]:
    # Bytes in, so a bad UTF-8 sequence is reported on its own line.
    if path is None:
        yield sys.stdin.buffer
    else:
        with open(path, "rb") as stream:
            yield stream


@contextlib.contextmanager
def _open_output(path: Optional[Path]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as stream:
            yield stream


def _write_text(path: Optional[Path], text: str) -> None:
    with _open_output(path) as stream:
        stream.write(text)


def _load_groups(config: RunConfig) -> Tuple[ManifestHeader, List[VideoGroup]]:
    with _open_manifest(config.input_path) as stream:
        return load_groups(stream, config.min_confidence)


def _load_labels(path: Path) -> Dict[str, int]:
    with open(path, "r", encoding="utf-8") as stream:
        return parse_labels(stream.read())


def _group_labels(groups: List[VideoGroup]) -> Dict[str, int]:
    return labels_from_records(r for g in groups for r in g.records)


# --- shared options ------------------------------------------------------

THETA_OPTION = typer.Option(0.8, "--theta", min=-1.0, max=1.0, help="Edge threshold on embedding similarity")
SIZE_FRAC_OPTION = typer.Option(
    "1/2", "--size-frac", help="Prune components of size <= N_F * fraction, e.g. 1/2"
)
JOBS_OPTION = typer.Option(None, "--jobs", "-j", min=1, help="Parallel workers (default: CPU count)")
MIN_CONF_OPTION = typer.Option(
    0.0, "--min-conf", min=0.0, max=1.0, help="Drop detections below this detector confidence"
)
SEED_OPTION = typer.Option(None, "--seed", envvar="FACEGRAPH_SEED", help="Random seed")
OUTPUT_OPTION = typer.Option(None, "--output", "-o", help="Output file (default: stdout)")
INPUT_ARGUMENT = typer.Argument(None, exists=True, dir_okay=False, help="Input manifest (default: stdin)")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    configure_logging(verbose)


@app.command()
@exit_on_error
def clean(
    manifest: Optional[Path] = INPUT_ARGUMENT,
    output: Optional[Path] = OUTPUT_OPTION,
    report: Optional[Path] = typer.Option(None, "--report", help="Write the per-video component report CSV here"),
    theta: float = THETA_OPTION,
    size_frac: str = SIZE_FRAC_OPTION,
    jobs: Optional[int] = JOBS_OPTION,
    min_conf: float = MIN_CONF_OPTION,
):
    """Build face graphs, flag small components as pruned, write an annotated manifest."""
    config = RunConfig.build(
        theta=theta,
        size_fraction=_parse_size_fraction(size_frac),
        jobs=jobs,
        min_confidence=min_conf,
        input_path=manifest,
        output_path=output,
    )
    header, groups = _load_groups(config)
    component_sets = asyncio.run(clean_groups(groups, config))

    with _open_output(config.output_path) as stream:
        annotated = (r for g, cs in zip(groups, component_sets) for r in annotate_records(g, cs))
        write_manifest(header, annotated, stream)

    for cs in component_sets:
        logger.info(
            "%s K=%d N_F=%d components=%d kept=%d pruned=%d",
            cs.video_id,
            cs.n_records,
            cs.n_f,
            len(cs.components),
            len(cs.kept_components),
            len(cs.pruned_components),
        )
    if report is not None:
        _write_text(report, formatters.component_report_csv(component_sets))


@app.command()
@exit_on_error
def aggregate(
    manifest: Optional[Path] = INPUT_ARGUMENT,
    output: Optional[Path] = OUTPUT_OPTION,
    scheme: str = typer.Option("face", "--scheme", help="avg, median, max, face, a comma list, or all"),
    theta: float = THETA_OPTION,
    size_frac: str = SIZE_FRAC_OPTION,
    no_clean: bool = typer.Option(False, "--no-clean", help="Baseline: aggregate every face, no graph cleaning"),
    labels: Optional[Path] = typer.Option(
        None, "--labels", exists=True, dir_okay=False, help="Labels; labeled videos with no faces get 0.5"
    ),
    faces: Optional[Path] = typer.Option(None, "--faces", help="Write per-component mean scores CSV here"),
    jobs: Optional[int] = JOBS_OPTION,
    min_conf: float = MIN_CONF_OPTION,
):
    """Collapse per-face scores into one verdict per video and scheme."""
    config = RunConfig.build(
        theta=theta,
        schemes=_parse_scheme_list(scheme),
        size_fraction=_parse_size_fraction(size_frac),
        jobs=jobs,
        no_clean=no_clean,
        min_confidence=min_conf,
        input_path=manifest,
        output_path=output,
    )
    _, groups = _load_groups(config)
    label_map = _load_labels(labels) if labels is not None else None
    verdicts, component_sets = asyncio.run(aggregate_groups(groups, config, labels=label_map))
    _write_text(config.output_path, formatters.verdicts_to_csv(verdicts))
    if faces is not None:
        _write_text(faces, formatters.face_predictions_csv(face_prediction_rows(groups, component_sets)))


@app.command()
@exit_on_error
def evaluate(
    verdicts: Optional[Path] = typer.Argument(None, exists=True, dir_okay=False, help="Verdict CSV (default: stdin)"),
    labels: Path = typer.Option(..., "--labels", exists=True, dir_okay=False, help="Label CSV or labeled manifest"),
    output: Optional[Path] = OUTPUT_OPTION,
    balance: bool = typer.Option(False, "--balance", help="Subsample the majority class before scoring"),
    seed: Optional[int] = SEED_OPTION,
):
    """Score verdicts against labels: log loss, accuracy, macro-F1."""
    with _open_input(verdicts) as stream:
        parsed = formatters.read_verdicts_csv(stream)
    results = evaluate_verdicts(parsed, _load_labels(labels), balance=balance, seed=resolve_seed(seed))
    # A single-scheme file gets flat metrics; several schemes are keyed by name.
    payload = next(iter(results.values())) if len(results) == 1 else results
    _write_text(output, formatters.metrics_to_json(payload))


@app.command()
@exit_on_error
def sweep(
    manifest: Optional[Path] = INPUT_ARGUMENT,
    output: Optional[Path] = OUTPUT_OPTION,
    thetas: str = typer.Option("0.7,0.8,0.9", "--thetas", help="Comma-separated similarity thresholds"),
    fracs: str = typer.Option("1/4,1/2,3/4", "--fracs", help="Comma-separated size fractions"),
    fmt: str = typer.Option("csv", "--format", help="csv (long table) or text (log-loss grid)"),
    plot: Optional[Path] = typer.Option(None, "--plot", help="Write a log-loss heatmap HTML file here"),
    labels: Optional[Path] = typer.Option(
        None, "--labels", exists=True, dir_okay=False, help="Labels (default: labels in the manifest)"
    ),
    balance: bool = typer.Option(False, "--balance", help="Subsample the majority class before scoring"),
    seed: Optional[int] = SEED_OPTION,
    jobs: Optional[int] = JOBS_OPTION,
    min_conf: float = MIN_CONF_OPTION,
):
    """Evaluate Face aggregation over a grid of thresholds."""
    if fmt not in ("csv", "text"):
        raise typer.BadParameter("--format must be csv or text")
    theta_values = _parse_float_list(thetas)
    frac_values = _parse_fraction_list(fracs)
    config = RunConfig.build(
        seed=seed, jobs=jobs, min_confidence=min_conf, input_path=manifest, output_path=output
    )
    _, groups = _load_groups(config)
    label_map = _load_labels(labels) if labels is not None else _group_labels(groups)

    frame = asyncio.run(
        run_sweep(groups, label_map, theta_values, frac_values, jobs=config.jobs, balance=balance, seed=config.seed)
    )
    text = formatters.sweep_to_csv(frame) if fmt == "csv" else formatters.sweep_grid_text(frame)
    _write_text(config.output_path, text)
    if plot is not None:
        formatters.write_sweep_heatmap(frame, plot)
        logger.info("Wrote heatmap to %s", plot)


@app.command()
@exit_on_error
def synth(
    output: Optional[Path] = OUTPUT_OPTION,
    truth: Optional[Path] = typer.Option(None, "--truth", help="Write the ground-truth sidecar here"),
    n_videos: int = typer.Option(20, "--videos", min=1, help="Number of videos"),
    n_frames: int = typer.Option(8, "--frames", min=1, help="Frames per video"),
    noise: float = typer.Option(0.1, "--noise", min=0.0, help="Noise norm relative to the identity direction"),
    dim: int = typer.Option(512, "--dim", min=2, help="Embedding dimension"),
    fp_count: int = typer.Option(2, "--fps", min=0, help="Scattered false positives per video"),
    fp_occurrences: int = typer.Option(1, "--fp-occurrences", min=1, help="Frames each false positive appears in"),
    partial_similarity: Optional[float] = typer.Option(
        None, "--partial-sim", min=-0.99, max=0.99, help="Place false positives at this cosine from identity 0"
    ),
    secondary_presence: float = typer.Option(
        1.0, "--secondary-presence", min=0.01, max=1.0, help="Presence of the second person in two-person videos"
    ),
    fake_fraction: float = typer.Option(0.5, "--fake-fraction", min=0.0, max=1.0),
    multi_face_fraction: float = typer.Option(0.5, "--multi-face-fraction", min=0.0, max=1.0),
    seed: Optional[int] = SEED_OPTION,
):
    """Generate a labeled synthetic manifest with a ground-truth sidecar."""
    specs = benchmark_specs(
        n_videos=n_videos,
        seed=resolve_seed(seed),
        n_frames=n_frames,
        fake_fraction=fake_fraction,
        multi_face_fraction=multi_face_fraction,
        noise_sigma=noise,
        embedding_dim=dim,
        fp_count=fp_count,
        fp_occurrences=fp_occurrences,
        fp_identity_similarity=partial_similarity,
        secondary_presence=secondary_presence,
    )
    records, ground_truth = generate_suite(specs)
    with _open_output(output) as stream:
        rows = write_manifest(ManifestHeader(embedding_dim=dim), records, stream)
    logger.info("Generated %d videos, %d records", len(specs), rows)
    if truth is not None:
        with _open_output(truth) as stream:
            write_truth(ground_truth, stream)


@app.command()
@exit_on_error
def sample(
    manifest: Optional[Path] = INPUT_ARGUMENT,
    output: Optional[Path] = OUTPUT_OPTION,
    epoch: int = typer.Option(0, "--epoch", min=0, help="Training epoch (changes the draw)"),
    bbox_factor: float = typer.Option(DEFAULT_BBOX_FACTOR, "--bbox-factor", min=1.0, help="Bbox enlargement factor"),
    frame_width: float = typer.Option(float("inf"), "--frame-width", help="Clamp expanded boxes to this width"),
    frame_height: float = typer.Option(float("inf"), "--frame-height", help="Clamp expanded boxes to this height"),
    theta: float = THETA_OPTION,
    size_frac: str = SIZE_FRAC_OPTION,
    no_clean: bool = typer.Option(False, "--no-clean", help="Sample from all faces, not only kept ones"),
    labels: Optional[Path] = typer.Option(
        None, "--labels", exists=True, dir_okay=False, help="Labels (default: labels in the manifest)"
    ),
    seed: Optional[int] = SEED_OPTION,
    jobs: Optional[int] = JOBS_OPTION,
    min_conf: float = MIN_CONF_OPTION,
):
    """Pick one epoch's training faces: 16 per real video, 4 per fake video."""
    config = RunConfig.build(
        theta=theta,
        size_fraction=_parse_size_fraction(size_frac),
        seed=seed,
        jobs=jobs,
        no_clean=no_clean,
        min_confidence=min_conf,
        input_path=manifest,
        output_path=output,
    )
    header, groups = _load_groups(config)
    label_map = _load_labels(labels) if labels is not None else _group_labels(groups)
    chosen = asyncio.run(
        sample_training_faces(groups, config, label_map, epoch, bbox_factor, (frame_width, frame_height))
    )
    with _open_output(config.output_path) as stream:
        write_manifest(header, chosen, stream)
    logger.info("Sampled %d faces from %d videos", len(chosen), len(groups))


@app.command()
@exit_on_error
def frames(
    total_frames: int = typer.Option(..., "--total-frames", min=0, help="Frames in the video"),
    fps_source: float = typer.Option(..., "--fps-source", min=0.001, help="Source frame rate"),
    rate: float = typer.Option(DEFAULT_RATE, "--rate", min=0.001, help="Target frames per second"),
    output: Optional[Path] = OUTPUT_OPTION,
):
    """Print the frame indices sampled at --rate frames per second."""
    plan = plan_frames(total_frames, fps_source, rate)
    _write_text(output, "".join(f"{i}\n" for i in plan.frame_indices))
    logger.debug("Selected %d of %d frames", len(plan), total_frames)


def run() -> None:
    app()


if __name__ == "__main__":
    run()
