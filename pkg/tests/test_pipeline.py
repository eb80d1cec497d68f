"""
Tests for the in-process pipeline stages and the benchmark experiments.
"""

import io

import pytest

from facegraph.config import RunConfig
from facegraph.errors import LabelMismatch
from facegraph.graph import clean_video
from facegraph.manifest_io import ManifestHeader, group_by_video, write_manifest
from facegraph.model import AggregationScheme, SizeFraction, VideoGroup, VideoVerdict
from facegraph.pipeline import (
    aggregate_groups,
    annotate_records,
    clean_groups,
    component_set_from_annotations,
    evaluate_verdicts,
    face_prediction_rows,
    join_labels,
    labels_from_records,
    load_groups,
    load_manifest_file,
    parse_labels,
    run_sweep,
    sample_training_faces,
)
from facegraph.synth import benchmark_specs, generate_suite, score_cleaning

from .helpers import DIM, axis, make_record, scattered_video, two_person_video, write_manifest_file

FACE = AggregationScheme.FACE
AVG = AggregationScheme.AVG


def config(**kwargs) -> RunConfig:
    return RunConfig.build(jobs=2, **kwargs)


def groups_of(records):
    return list(group_by_video(records))


def manifest_text(records, dim=DIM) -> str:
    stream = io.StringIO()
    write_manifest(ManifestHeader(embedding_dim=dim), records, stream)
    return stream.getvalue()


def suite(**kwargs):
    records, truth = generate_suite(benchmark_specs(**kwargs))
    return groups_of(records), labels_from_records(records), truth


def cell(frame, theta, frac, metric="log_loss"):
    row = frame[(frame["theta"] == theta) & (frame["size_frac"] == frac)]
    assert len(row) == 1
    return float(row[metric].iloc[0])


class TestLoading:
    """Tests for manifest and label loading."""

    def test_load_groups_sorted_by_video(self):
        records = two_person_video("b") + scattered_video("a")
        header, groups = load_groups(io.StringIO(manifest_text(records)))
        assert header.embedding_dim == DIM
        assert [g.video_id for g in groups] == ["a", "b"]
        assert [g.n_f for g in groups] == [4, 2]

    def test_min_confidence_drops_detections(self):
        records = [make_record("v", 0, 0, axis(0), conf=0.5), make_record("v", 1, 0, axis(0), conf=0.97)]
        _, groups = load_groups(io.StringIO(manifest_text(records)), min_confidence=0.9)
        assert len(groups[0]) == 1
        assert groups[0].n_f == 1

    def test_load_manifest_file_reads_bytes(self, tmp_path):
        records = [make_record("v", 0, 0, axis(0), conf=0.5), make_record("v", 1, 0, axis(0), conf=0.97)]
        path = write_manifest_file(tmp_path / "faces.jsonl", records)
        _, groups = load_manifest_file(path, config(min_confidence=0.9).min_confidence)
        assert [r.record_id for r in groups[0].records] == [("v", 1, 0)]
        assert groups[0].records[0].line_no == 3

    def test_parse_labels_csv(self):
        assert parse_labels("video_id,label\nv1,1\nv2,0\n") == {"v1": 1, "v2": 0}

    def test_parse_labels_from_manifest(self):
        text = manifest_text(two_person_video("v1", 1) + scattered_video("v2", 0))
        assert parse_labels(text) == {"v1": 1, "v2": 0}

    def test_conflicting_labels(self):
        records = [make_record("v", 0, label=0), make_record("v", 1, label=1)]
        with pytest.raises(LabelMismatch):
            labels_from_records(records)


class TestAnnotations:
    """Tests for carrying clean results through manifest fields."""

    def test_round_trip(self):
        group = VideoGroup.from_records("v1", two_person_video() + [make_record("v1", 1, 2, axis(1), 0.5)])
        cleaned = clean_video(group, 0.8, "1/2")
        annotated = VideoGroup.from_records("v1", annotate_records(group, cleaned))
        assert component_set_from_annotations(annotated, 0.8, SizeFraction(1, 2)) == cleaned

    def test_unannotated_returns_none(self):
        group = VideoGroup.from_records("v1", two_person_video())
        assert component_set_from_annotations(group) is None

    def test_mixed_kept_flags_return_none(self):
        records = [
            make_record("v", 0, 0, axis(0), 0.5, component=0, kept=True),
            make_record("v", 1, 0, axis(0), 0.5, component=0, kept=False),
        ]
        assert component_set_from_annotations(VideoGroup.from_records("v", records)) is None

    @pytest.mark.asyncio
    async def test_annotations_take_precedence(self):
        """A cleaned manifest's kept flags are used as written."""
        records = [
            make_record("v1", r.frame_index, r.face_index, r.embedding, r.score, component=0, kept=False)
            for r in two_person_video()
        ]
        verdicts, _ = await aggregate_groups(groups_of(records), config())
        assert verdicts == [VideoVerdict("v1", FACE, 0.5, defaulted=True)]


class TestCleanAndAggregate:
    """Tests for the clean and aggregate stages."""

    @pytest.mark.asyncio
    async def test_clean_groups_ordered(self):
        groups = groups_of(scattered_video("z") + two_person_video("a"))
        results = await clean_groups(reversed(groups), config())
        assert [cs.video_id for cs in results] == ["a", "z"]
        assert [len(cs.kept_components) for cs in results] == [2, 0]

    @pytest.mark.asyncio
    async def test_fixture_values(self):
        groups = groups_of(two_person_video("v1") + scattered_video("v2"))
        verdicts, _ = await aggregate_groups(groups, config(), (AVG, FACE))
        assert [(v.video_id, v.scheme) for v in verdicts] == [("v1", AVG), ("v1", FACE), ("v2", AVG), ("v2", FACE)]
        assert verdicts[0].score == pytest.approx(0.475, abs=1e-12)
        assert verdicts[1].score == pytest.approx(0.8, abs=1e-12)
        assert all(v.defaulted and v.score == 0.5 for v in verdicts[2:])

    @pytest.mark.asyncio
    async def test_schemes_default_to_config(self):
        groups = groups_of(two_person_video("v1"))
        verdicts, _ = await aggregate_groups(groups, config(schemes="max,face"))
        assert [(v.scheme, v.score) for v in verdicts] == [(AggregationScheme.MAX, 0.9), (FACE, pytest.approx(0.8))]

    @pytest.mark.asyncio
    async def test_no_clean_uses_every_face(self):
        verdicts, _ = await aggregate_groups(groups_of(scattered_video("v2")), config(no_clean=True), (AVG,))
        assert verdicts[0].score == pytest.approx(0.3)
        assert not verdicts[0].defaulted

    @pytest.mark.asyncio
    async def test_labeled_video_without_faces_defaults(self):
        groups = groups_of(two_person_video("v1"))
        verdicts, component_sets = await aggregate_groups(groups, config(), (FACE,), labels={"v1": 1, "v0": 0})
        assert [v.video_id for v in verdicts] == ["v0", "v1"]
        assert verdicts[0].defaulted and verdicts[0].score == 0.5
        assert [cs.video_id for cs in component_sets] == ["v1"]

    @pytest.mark.asyncio
    async def test_face_prediction_rows(self):
        groups = groups_of(two_person_video("v1"))
        _, component_sets = await aggregate_groups(groups, config())
        rows = face_prediction_rows(groups, component_sets)
        assert [(vid, index, size) for vid, index, size, _ in rows] == [("v1", 0, 2), ("v1", 1, 2)]
        assert [mean for *_, mean in rows] == [pytest.approx(0.8), pytest.approx(0.15)]


class TestEvaluation:
    """Tests for joining verdicts with labels and scoring them."""

    def test_join_orders_by_video(self):
        verdicts = [VideoVerdict("b", FACE, 0.2), VideoVerdict("a", FACE, 0.9)]
        joined = join_labels(verdicts, {"a": 1, "b": 0})
        assert [(i.video_id, i.score, i.label) for i in joined] == [("a", 0.9, 1), ("b", 0.2, 0)]

    @pytest.mark.parametrize(
        "verdict_ids,labels",
        [
            (["a", "a"], {"a": 1}),
            (["a", "x"], {"a": 1}),
            (["a"], {"a": 1, "b": 0}),
        ],
    )
    def test_join_mismatch(self, verdict_ids, labels):
        verdicts = [VideoVerdict(vid, FACE, 0.5) for vid in verdict_ids]
        with pytest.raises(LabelMismatch):
            join_labels(verdicts, labels)

    def test_scheme_order(self):
        verdicts = [VideoVerdict("a", s, 0.7) for s in (FACE, AggregationScheme.MAX, AVG)]
        results = evaluate_verdicts(verdicts, {"a": 1})
        assert list(results) == ["avg", "max", "face"]
        assert results["face"]["accuracy"] == 1.0

    def test_constant_half(self):
        verdicts = [VideoVerdict(f"v{i}", FACE, 0.5, defaulted=True) for i in range(6)]
        labels = {f"v{i}": i % 2 for i in range(6)}
        assert evaluate_verdicts(verdicts, labels)["face"]["log_loss"] == pytest.approx(0.6931, abs=0.0005)

    def test_balance(self):
        verdicts = [VideoVerdict(f"v{i}", FACE, 0.2) for i in range(6)]
        labels = {f"v{i}": int(i == 0) for i in range(6)}
        assert evaluate_verdicts(verdicts, labels, balance=True, seed=1)["face"]["n_videos"] == 2


class TestRunSweep:
    """Tests for the threshold grid."""

    @pytest.mark.asyncio
    async def test_default_grid_shape(self):
        groups = groups_of(two_person_video("v1", 1) + scattered_video("v2", 0))
        frame = await run_sweep(groups, {"v1": 1, "v2": 0}, jobs=2)
        assert list(frame.columns) == ["theta", "size_frac", "log_loss", "accuracy", "macro_f1", "n_videos"]
        assert list(zip(frame["theta"], frame["size_frac"])) == [
            (t, f) for t in (0.7, 0.8, 0.9) for f in ("1/4", "1/2", "3/4")
        ]
        assert (frame["n_videos"] == 2).all()

    @pytest.mark.asyncio
    async def test_single_cell_matches_composed_stages(self):
        groups, labels, _ = suite(n_videos=30, seed=5, fp_count=2, embedding_dim=64)
        frame = await run_sweep(groups, labels, [0.8], ["1/2"], jobs=3)
        verdicts, _ = await aggregate_groups(groups, config(), (FACE,))
        expected = evaluate_verdicts(verdicts, labels)["face"]
        assert len(frame) == 1
        assert cell(frame, 0.8, "1/2") == expected["log_loss"]
        assert cell(frame, 0.8, "1/2", "accuracy") == expected["accuracy"]

    @pytest.mark.asyncio
    async def test_absent_labeled_video_counts_as_half(self):
        groups = groups_of(two_person_video("v1", 1))
        frame = await run_sweep(groups, {"v1": 1, "v0": 0}, [0.8], ["1/2"])
        assert int(frame["n_videos"].iloc[0]) == 2
        assert cell(frame, 0.8, "1/2", "accuracy") == 0.5

    @pytest.mark.asyncio
    async def test_unlabeled_video_rejected(self):
        groups = groups_of(two_person_video("v1", None))
        with pytest.raises(LabelMismatch):
            await run_sweep(groups, {}, [0.8], ["1/2"])


class TestSampleTrainingFaces:
    """Tests for per-epoch balanced sampling of kept faces."""

    @staticmethod
    def long_video(video_id, label, frames=20):
        return [make_record(video_id, f, 0, axis(0, 0.001 * f), 0.5, label) for f in range(frames)]

    @pytest.mark.asyncio
    async def test_quotas_and_expansion(self):
        records = self.long_video("real", 0) + self.long_video("fake", 1)
        groups = groups_of(records)
        chosen = await sample_training_faces(groups, config(seed=3), {"real": 0, "fake": 1}, epoch=0)
        assert sum(1 for r in chosen if r.video_id == "real") == 16
        assert sum(1 for r in chosen if r.video_id == "fake") == 4
        assert all(r.bbox.height == pytest.approx(156.0) for r in chosen)

    @pytest.mark.asyncio
    async def test_only_kept_faces(self):
        records = self.long_video("real", 0, frames=4) + [make_record("real", 0, 1, axis(2), 0.5, 0)]
        chosen = await sample_training_faces(groups_of(records), config(), {"real": 0})
        assert {r.record_id for r in chosen} == {("real", f, 0) for f in range(4)}

    @pytest.mark.asyncio
    async def test_unlabeled_skipped_and_clamped(self):
        records = self.long_video("real", 0, frames=3) + self.long_video("other", None, frames=3)
        chosen = await sample_training_faces(
            groups_of(records), config(), {"real": 0}, bbox_factor=2.0, frame_size=(120.0, 150.0)
        )
        assert {r.video_id for r in chosen} == {"real"}
        assert all(r.bbox.x1 <= 120.0 and r.bbox.y1 <= 150.0 for r in chosen)

    @pytest.mark.asyncio
    async def test_epochs_deterministic(self):
        groups = groups_of(self.long_video("real", 0, frames=40))
        first = await sample_training_faces(groups, config(seed=7), {"real": 0}, epoch=2)
        again = await sample_training_faces(groups, config(seed=7), {"real": 0}, epoch=2)
        assert first == again


class TestBenchmarks:
    """End-to-end experiments on synthetic suites."""

    @pytest.mark.asyncio
    async def test_face_beats_avg_on_multi_person_fakes(self):
        """One manipulated face among real ones is diluted by Avg but not by Face."""
        groups, labels, _ = suite(n_videos=200, seed=8, fp_count=2, embedding_dim=64)
        verdicts, _ = await aggregate_groups(groups, config(), (AVG, FACE))
        results = evaluate_verdicts(verdicts, labels)
        assert results["face"]["log_loss"] < results["avg"]["log_loss"]
        assert results["face"]["accuracy"] > results["avg"]["accuracy"]

    @pytest.mark.asyncio
    async def test_low_theta_merges_near_face_false_positives(self):
        groups, labels, _ = suite(
            n_videos=60,
            seed=3,
            multi_face_fraction=0.0,
            fp_count=2,
            fp_occurrences=2,
            fp_identity_similarity=0.75,
            fp_score=(0.6, 1.0),
            embedding_dim=256,
        )
        frame = await run_sweep(groups, labels, [0.7, 0.8], ["1/4", "1/2"], jobs=2)
        for frac in ("1/4", "1/2"):
            assert cell(frame, 0.7, frac) > cell(frame, 0.8, frac)

    @pytest.mark.asyncio
    async def test_size_threshold_direction(self):
        """1/4 keeps 3-frame false positives, 3/4 prunes a 5-of-8-frame person."""
        groups, labels, truth = suite(
            n_videos=60,
            seed=4,
            multi_face_fraction=1.0,
            secondary_presence=0.6,
            fp_count=2,
            fp_occurrences=3,
            embedding_dim=64,
        )
        for frac, perfect in (("1/2", True), ("3/4", False)):
            for cs in await clean_groups(groups, config(size_fraction=frac)):
                precision, recall = score_cleaning(cs, truth)
                assert precision == 1.0
                assert (recall == 1.0) is perfect
        for cs in await clean_groups(groups, config(size_fraction="1/4")):
            assert score_cleaning(cs, truth)[0] < 1.0

        frame = await run_sweep(groups, labels, [0.8], ["1/4", "1/2", "3/4"], jobs=2)
        assert cell(frame, 0.8, "1/4") > cell(frame, 0.8, "1/2")
        assert cell(frame, 0.8, "3/4") > cell(frame, 0.8, "1/2")
