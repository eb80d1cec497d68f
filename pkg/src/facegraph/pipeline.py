"""
In-process pipeline stages shared by the CLI and the tool server.

Each stage works on VideoGroups sorted by video_id and fans the per-video
work out over a ParallelVideoRunner, so outputs are ordered by video_id
whatever order the workers finish in.
"""

import io
import logging
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from .aggregation import ALL_SCHEMES, aggregate, aggregate_all, component_means, defaulted_verdicts, scores_from_records
from .config import DEFAULT_SWEEP_FRACS, DEFAULT_SWEEP_THETAS, RunConfig
from .errors import LabelMismatch
from .formatters import read_labels_csv
from .graph import baseline_component_set, build_face_graph, clean_video, connected_components, prune_components
from .manifest_io import ManifestHeader, Stream, filter_by_confidence, group_by_video, read_manifest
from .metrics import LabeledVerdict, balance_classes, evaluate
from .model import AggregationScheme, Component, ComponentSet, FaceRecord, SizeFraction, VideoGroup, VideoVerdict
from .parallel_runner import ParallelVideoRunner
from .sampling import expand_bbox, plan_balanced_faces

logger = logging.getLogger(__name__)


def progress_logger(stage: str) -> Callable[[int, int], None]:
    """Progress callback that logs `processed N/M videos` about ten times per run."""

    def report(done: int, total: int) -> None:
        step = max(1, total // 10)
        if done == total or done % step == 0:
            logger.info("%s: processed %d/%d videos", stage, done, total)

    return report


def _sorted_groups(groups: Iterable[VideoGroup]) -> List[VideoGroup]:
    return sorted(groups, key=lambda g: g.video_id)


def load_groups(stream: Stream, min_confidence: float = 0.0) -> Tuple[ManifestHeader, List[VideoGroup]]:
    """Read a manifest, drop low-confidence detections and group by video."""
    header, records = read_manifest(stream)
    if min_confidence > 0:
        records = filter_by_confidence(records, min_confidence)
    groups = list(group_by_video(records))
    logger.debug("Read %d videos, %d records", len(groups), sum(len(g) for g in groups))
    return header, groups


def load_manifest_file(path: Union[str, Path], min_confidence: float = 0.0) -> Tuple[ManifestHeader, List[VideoGroup]]:
    """load_groups over a manifest file, read as bytes and decoded line by line."""
    with open(Path(path), "rb") as stream:
        return load_groups(stream, min_confidence)


def parse_labels(text: str) -> Dict[str, int]:
    """Labels from `video_id,label` CSV text or from the label fields of a manifest."""
    first = next((line for line in text.splitlines() if line.strip()), "")
    if first.lstrip().startswith("{"):
        _, records = read_manifest(io.StringIO(text))
        return labels_from_records(records)
    return read_labels_csv(text)


def labels_from_records(records: Iterable[FaceRecord]) -> Dict[str, int]:
    """
    Per-video labels carried by manifest rows.

    Raises:
        LabelMismatch: If rows of one video disagree on its label
    """
    labels: Dict[str, int] = {}
    conflicting = set()
    for record in records:
        if record.video_label is None:
            continue
        previous = labels.setdefault(record.video_id, record.video_label)
        if previous != record.video_label:
            conflicting.add(record.video_id)
    if conflicting:
        raise LabelMismatch(conflicting, "conflicting labels within video")
    return labels


def annotate_records(group: VideoGroup, component_set: ComponentSet) -> List[FaceRecord]:
    """Copy of the group's records with `component` and `kept` filled in."""
    placement = {}
    for index, component in enumerate(component_set.components):
        for rid in component.member_ids:
            placement[rid] = (index, component.kept)
    return [r.with_annotation(*placement[r.record_id]) for r in group.records]


def component_set_from_annotations(
    group: VideoGroup,
    theta: Optional[float] = None,
    frac: Optional[SizeFraction] = None,
) -> Optional[ComponentSet]:
    """
    Rebuild a video's ComponentSet from the `component`/`kept` row fields.

    Returns None when any record is unannotated or one component carries
    mixed kept flags; callers then clean the video themselves.
    """
    members: Dict[int, list] = {}
    kept: Dict[int, bool] = {}
    for record in group.records:
        if record.component is None or record.kept is None:
            return None
        members.setdefault(record.component, []).append(record.record_id)
        if kept.setdefault(record.component, record.kept) != record.kept:
            logger.warning("%s: component %d has mixed kept flags; recleaning", group.video_id, record.component)
            return None
    components = tuple(Component.of(members[i], kept=kept[i]) for i in sorted(members))
    return ComponentSet(
        video_id=group.video_id,
        components=components,
        n_f=group.n_f,
        theta=theta,
        size_fraction=frac,
    )


def _component_set_for(group: VideoGroup, config: RunConfig) -> ComponentSet:
    if config.no_clean:
        return baseline_component_set(group)
    annotated = component_set_from_annotations(group, config.theta.theta, config.size_fraction)
    if annotated is not None:
        return annotated
    return clean_video(group, config.theta, config.size_fraction)


async def clean_groups(groups: Iterable[VideoGroup], config: RunConfig) -> List[ComponentSet]:
    """Face-graph cleaning of every video, ordered by video_id."""
    ordered = _sorted_groups(groups)
    runner = ParallelVideoRunner(config.jobs)
    return await runner.run_all(
        lambda g: clean_video(g, config.theta, config.size_fraction),
        ordered,
        progress_callback=progress_logger("clean"),
    )


async def component_sets_for(groups: Iterable[VideoGroup], config: RunConfig) -> List[ComponentSet]:
    """
    Component sets for aggregation: the baseline view with no_clean, the
    clean-stage annotations when every record carries them, else a fresh clean.
    """
    ordered = _sorted_groups(groups)
    runner = ParallelVideoRunner(config.jobs)
    return await runner.run_all(
        lambda g: _component_set_for(g, config),
        ordered,
        progress_callback=progress_logger("aggregate"),
    )


async def aggregate_groups(
    groups: Iterable[VideoGroup],
    config: RunConfig,
    schemes: Optional[Sequence[AggregationScheme]] = None,
    labels: Optional[Mapping[str, int]] = None,
) -> Tuple[List[VideoVerdict], List[ComponentSet]]:
    """
    Verdicts for every video under every requested scheme (default: the
    config's schemes).

    Videos named in `labels` that have no detections get defaulted 0.5
    verdicts. Output rows are ordered by video_id, then by scheme order.

    Returns:
        Tuple of (verdicts, component sets of the videos with detections)

    Raises:
        MissingScore: If a kept record has no score
    """
    schemes = tuple(schemes) if schemes is not None else config.schemes
    ordered = _sorted_groups(groups)
    component_sets = await component_sets_for(ordered, config)

    by_video: Dict[str, List[VideoVerdict]] = {}
    for group, component_set in zip(ordered, component_sets):
        scores = scores_from_records(group.records)
        by_video[group.video_id] = aggregate_all(component_set, scores, schemes)

    missing = sorted(set(labels or {}) - set(by_video))
    if missing:
        logger.info("%d labeled videos have no detections; predicting 0.5", len(missing))
    for video_id in missing:
        by_video[video_id] = defaulted_verdicts(video_id, schemes)

    verdicts = [v for video_id in sorted(by_video) for v in by_video[video_id]]
    defaulted = sum(1 for v in verdicts if v.defaulted)
    if defaulted:
        logger.debug("%d defaulted verdicts", defaulted)
    return verdicts, component_sets


def face_prediction_rows(
    groups: Sequence[VideoGroup], component_sets: Sequence[ComponentSet]
) -> List[Tuple[str, int, int, float]]:
    """Per-component mean scores of kept components, for every video."""
    rows = []
    by_id = {g.video_id: g for g in groups}
    for component_set in component_sets:
        scores = scores_from_records(by_id[component_set.video_id].records)
        for index, size, mean in component_means(component_set, scores):
            rows.append((component_set.video_id, index, size, mean))
    return rows


def join_labels(verdicts: Sequence[VideoVerdict], labels: Mapping[str, int]) -> List[LabeledVerdict]:
    """
    Pair single-scheme verdicts with labels, ordered by video_id.

    Raises:
        LabelMismatch: On duplicate verdicts, verdicts without labels, or
            labels without verdicts
    """
    seen: Dict[str, VideoVerdict] = {}
    duplicates = set()
    for verdict in verdicts:
        if verdict.video_id in seen:
            duplicates.add(verdict.video_id)
        seen[verdict.video_id] = verdict
    if duplicates:
        raise LabelMismatch(duplicates, "more than one verdict per video")
    unlabeled = set(seen) - set(labels)
    if unlabeled:
        raise LabelMismatch(unlabeled, "verdicts for videos without labels")
    unjudged = set(labels) - set(seen)
    if unjudged:
        raise LabelMismatch(unjudged, "labeled videos without verdicts")
    return [LabeledVerdict(vid, seen[vid].score, labels[vid]) for vid in sorted(seen)]


def evaluate_verdicts(
    verdicts: Sequence[VideoVerdict],
    labels: Mapping[str, int],
    balance: bool = False,
    seed: int = 0,
) -> Dict[str, Dict[str, float]]:
    """
    Metrics per aggregation scheme present in `verdicts`.

    Returns:
        {scheme value: {"log_loss", "accuracy", "macro_f1", "n_videos"}} in
        avg, median, max, face order

    Raises:
        LabelMismatch: If verdicts and labels do not cover the same videos
        EmptyInput: If there is nothing to evaluate
    """
    by_scheme: Dict[AggregationScheme, List[VideoVerdict]] = {}
    for verdict in verdicts:
        by_scheme.setdefault(AggregationScheme(verdict.scheme), []).append(verdict)
    if not by_scheme:
        by_scheme[AggregationScheme.FACE] = []

    results = {}
    for scheme in ALL_SCHEMES:
        if scheme not in by_scheme:
            continue
        items = join_labels(by_scheme[scheme], labels)
        if balance:
            items = balance_classes(items, seed)
        results[scheme.value] = evaluate(items)
    return results


def _require_labels(video_ids: Iterable[str], labels: Mapping[str, int]) -> None:
    unlabeled = set(video_ids) - set(labels)
    if unlabeled:
        raise LabelMismatch(unlabeled, "videos without labels")


async def run_sweep(
    groups: Iterable[VideoGroup],
    labels: Mapping[str, int],
    thetas: Sequence[float] = DEFAULT_SWEEP_THETAS,
    fracs: Sequence[SizeFraction] = DEFAULT_SWEEP_FRACS,
    jobs: int = 1,
    balance: bool = False,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Clean, Face-aggregate and evaluate at every (theta, size fraction) pair.

    The graph and its components depend only on theta, so they are built
    once per theta and pruned at every fraction.

    Returns:
        DataFrame with columns theta, size_frac, log_loss, accuracy,
        macro_f1, n_videos; one row per pair in theta-major order

    Raises:
        LabelMismatch: If a video with detections has no label
    """
    ordered = _sorted_groups(groups)
    _require_labels((g.video_id for g in ordered), labels)
    absent = sorted(set(labels) - {g.video_id for g in ordered})
    runner = ParallelVideoRunner(jobs)
    scores = [scores_from_records(g.records) for g in ordered]

    rows = []
    for theta in thetas:
        per_video = await runner.run_all(
            lambda g: connected_components(build_face_graph(g, theta)),
            ordered,
            progress_callback=progress_logger(f"sweep theta={theta:g}"),
        )
        for frac in fracs:
            frac = SizeFraction.coerce(frac)
            items = []
            for group, components, video_scores in zip(ordered, per_video, scores):
                component_set = prune_components(components, group.n_f, frac, group.video_id, theta)
                verdict = aggregate(component_set, video_scores, AggregationScheme.FACE)
                items.append(LabeledVerdict(group.video_id, verdict.score, labels[group.video_id]))
            items.extend(LabeledVerdict(vid, 0.5, labels[vid]) for vid in absent)
            items.sort(key=lambda item: item.video_id)
            if balance:
                items = balance_classes(items, seed)
            metrics = evaluate(items)
            rows.append({"theta": float(theta), "size_frac": str(frac), **metrics})
            logger.debug("theta=%g frac=%s log_loss=%.4f", theta, frac, metrics["log_loss"])

    return pd.DataFrame(rows, columns=["theta", "size_frac", "log_loss", "accuracy", "macro_f1", "n_videos"])


async def sample_training_faces(
    groups: Iterable[VideoGroup],
    config: RunConfig,
    labels: Mapping[str, int],
    epoch: int = 0,
    bbox_factor: float = 1.3,
    frame_size: Tuple[float, float] = (float("inf"), float("inf")),
) -> List[FaceRecord]:
    """
    Training faces for one epoch: per labeled video, a seeded class-balanced
    draw (16 real / 4 fake) from the kept faces, with each bbox expanded.

    Unlabeled videos are skipped.
    """
    ordered = _sorted_groups(groups)
    component_sets = await component_sets_for(ordered, config)
    width, height = frame_size

    chosen: List[FaceRecord] = []
    skipped = 0
    for group, component_set in zip(ordered, component_sets):
        label = labels.get(group.video_id)
        if label is None:
            skipped += 1
            continue
        kept = set(component_set.kept_ids)
        candidates = [r for r in group.records if r.record_id in kept]
        picks = plan_balanced_faces(label, candidates, config.seed, group.video_id, epoch)
        chosen.extend(
            replace(r, bbox=expand_bbox(r.bbox, bbox_factor, width, height)) for r in picks
        )
    if skipped:
        logger.warning("Skipped %d unlabeled videos", skipped)
    return chosen
