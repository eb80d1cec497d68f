"""
Tests for face-graph construction, components and pruning.
"""

import io
import random
from collections import deque

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as scipy_components

from facegraph.errors import DimensionMismatch, MissingEmbedding
from facegraph.graph import (
    FaceGraph,
    UnionFind,
    baseline_component_set,
    build_face_graph,
    clean_video,
    connected_components,
    is_pruned,
    prune_components,
    similarity,
)
from facegraph.manifest_io import ManifestHeader, read_manifest, write_manifest
from facegraph.model import Component, SizeFraction, VideoGroup, normalize_embedding

from .helpers import axis, make_record


def partition(components):
    return {frozenset(c.member_ids) for c in components}


def bfs_partition(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    parts = set()
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        queue, members = deque([start]), []
        while queue:
            node = queue.popleft()
            members.append(node)
            for nxt in adj[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
        parts.add(frozenset(members))
    return parts


def walkthrough_group():
    """N_F = 4: person A has 5 faces (two in frame 0), person B has 2."""
    records = [make_record("fig", f, 0, axis(0, 0.01 * (f + 1))) for f in range(4)]
    records.append(make_record("fig", 0, 1, axis(0, 0.05)))
    records.append(make_record("fig", 1, 2, axis(2, 0.01)))
    records.append(make_record("fig", 3, 1, axis(2, 0.02)))
    return VideoGroup.from_records("fig", records)


class TestUnionFind:
    """Tests for the disjoint-set structure."""

    def test_union_and_find(self):
        uf = UnionFind(5)
        assert uf.union(0, 1)
        assert uf.union(3, 4)
        assert not uf.union(1, 0)
        assert uf.find(0) == uf.find(1)
        assert uf.find(2) == 2
        assert sorted(sorted(g) for g in uf.groups().values()) == [[0, 1], [2], [3, 4]]

    def test_union_by_rank(self):
        """The shallower tree goes under the deeper root; equal ranks grow by one."""
        uf = UnionFind(4)
        uf.union(0, 1)
        root = uf.find(0)
        assert uf.rank[root] == 1
        uf.union(2, 0)
        assert uf.find(2) == root
        assert uf.rank[root] == 1
        uf.union(3, 2)
        assert uf.find(3) == root

    def test_long_chain(self):
        """A 100k-node chain resolves without recursion."""
        n = 100_000
        uf = UnionFind(n)
        for i in range(n - 1):
            uf.union(i, i + 1)
        assert len({uf.find(i) for i in range(0, n, 997)}) == 1


class TestSimilarity:
    """Tests for pairwise similarity and edge thresholds."""

    def test_dot_product(self):
        assert similarity((1.0, 0.0), (0.8, 0.6)) == pytest.approx(0.8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            similarity((1.0, 0.0), (1.0, 0.0, 0.0))

    def test_edge_threshold_is_strict(self):
        """Similarity exactly equal to theta makes no edge."""
        group = VideoGroup.from_records(
            "v", [make_record("v", 0, 0, (1.0, 0.0)), make_record("v", 1, 0, (0.8, 0.6))]
        )
        assert build_face_graph(group, 0.8).edges == frozenset()
        assert build_face_graph(group, 0.79).edges == frozenset({(0, 1)})

    def test_same_frame_faces_may_connect(self):
        group = VideoGroup.from_records(
            "v", [make_record("v", 0, 0, axis(0)), make_record("v", 0, 1, axis(0, 0.01))]
        )
        assert build_face_graph(group).edges == frozenset({(0, 1)})

    def test_embeddings_normalized_before_comparison(self):
        """Scaled embeddings compare by direction only."""
        group = VideoGroup.from_records(
            "v", [make_record("v", 0, 0, (10.0, 0.0)), make_record("v", 1, 0, (0.3, 0.01))]
        )
        assert build_face_graph(group, 0.99).edges == frozenset({(0, 1)})

    def test_missing_embedding(self):
        group = VideoGroup.from_records("v", [make_record("v", 0, 0, axis(0)), make_record("v", 1)])
        with pytest.raises(MissingEmbedding) as exc_info:
            build_face_graph(group)
        assert exc_info.value.record_id == ("v", 1, 0)

    def test_missing_embedding_names_manifest_line(self):
        buffer = io.StringIO()
        write_manifest(ManifestHeader(embedding_dim=4), [make_record("v", 0, 0, axis(0)), make_record("v", 1)], buffer)
        _, records = read_manifest(io.StringIO(buffer.getvalue()))
        group = VideoGroup.from_records("v", list(records))
        with pytest.raises(MissingEmbedding) as exc_info:
            build_face_graph(group)
        assert exc_info.value.line_no == 3
        assert str(exc_info.value).startswith("line 3: ")

    def test_block_size_does_not_change_edges(self):
        rng = np.random.default_rng(3)
        base = rng.standard_normal((3, 16))
        records = [
            make_record("v", i, 0, (base[i % 3] + 0.2 * rng.standard_normal(16)).tolist()) for i in range(30)
        ]
        group = VideoGroup.from_records("v", records)
        assert build_face_graph(group, 0.8, block_size=1).edges == build_face_graph(group, 0.8, block_size=256).edges

    def test_ties_on_random_embeddings_make_no_edge(self):
        """theta set to an exact pair similarity: that pair gets no edge, at any block size."""
        rng = np.random.default_rng(17)
        for _ in range(20):
            vectors = [normalize_embedding(rng.standard_normal(512)) for _ in range(40)]
            theta = similarity(vectors[3], vectors[17])
            group = VideoGroup.from_records("v", [make_record("v", i, 0, v) for i, v in enumerate(vectors)])

            graph = build_face_graph(group, theta)
            assert (3, 17) not in graph.edges
            assert build_face_graph(group, theta, block_size=7).edges == graph.edges
            expected = {
                (i, j)
                for i in range(40)
                for j in range(i + 1, 40)
                if similarity(vectors[i], vectors[j]) > theta
            }
            assert graph.edges == expected

    def test_empty_group(self):
        graph = build_face_graph(VideoGroup.from_records("v", []))
        assert graph.n_nodes == 0
        assert connected_components(graph) == []


class TestConnectedComponents:
    """Tests for component extraction."""

    def test_every_node_in_one_component(self):
        graph = FaceGraph(node_ids=tuple(("v", i, 0) for i in range(5)), edges=frozenset({(0, 1), (1, 2)}), theta=0.8)
        components = connected_components(graph)
        members = [rid for c in components for rid in c.member_ids]
        assert sorted(members) == sorted(graph.node_ids)
        assert len(members) == len(set(members))
        assert [c.size for c in components] == [3, 1, 1]

    def test_order_by_size_then_min_member(self):
        graph = FaceGraph(
            node_ids=tuple(("v", i, 0) for i in range(6)),
            edges=frozenset({(3, 4), (0, 5)}),
            theta=0.8,
        )
        components = connected_components(graph)
        assert [c.min_member for c in components] == [("v", 0, 0), ("v", 3, 0), ("v", 1, 0), ("v", 2, 0)]

    def test_invalid_edge_rejected(self):
        with pytest.raises(ValueError):
            FaceGraph(node_ids=(("v", 0, 0), ("v", 1, 0)), edges=frozenset({(1, 0)}), theta=0.8)

    def test_matches_bfs_and_scipy_on_random_graphs(self):
        """1000 random graphs: union-find partitions equal BFS and scipy partitions."""
        rnd = random.Random(1234)
        for _ in range(1000):
            n = rnd.randint(1, 200)
            edges = set()
            if n > 1:
                for _ in range(rnd.randint(0, 2 * n)):
                    i, j = sorted(rnd.sample(range(n), 2))
                    edges.add((i, j))
            graph = FaceGraph(node_ids=tuple(("g", i, 0) for i in range(n)), edges=frozenset(edges), theta=0.8)
            ours = {frozenset(rid[1] for rid in c.member_ids) for c in connected_components(graph)}
            assert ours == bfs_partition(n, edges)

            rows = [i for i, _ in edges]
            cols = [j for _, j in edges]
            matrix = coo_matrix(([1] * len(edges), (rows, cols)), shape=(n, n))
            count, labels = scipy_components(matrix, directed=False)
            assert len(ours) == count
            expected = {}
            for node, label in enumerate(labels.tolist()):
                expected.setdefault(label, set()).add(node)
            assert ours == {frozenset(s) for s in expected.values()}


class TestPruning:
    """Tests for the size-based pruning rule."""

    def test_walkthrough(self):
        """N_F = 4 with components of sizes 5 and 2: only the 2-node component is pruned."""
        result = clean_video(walkthrough_group(), 0.8, "1/2")
        assert [c.size for c in result.components] == [5, 2]
        assert [c.kept for c in result.components] == [True, False]
        assert result.n_f == 4
        assert result.theta == 0.8
        assert result.size_fraction == SizeFraction(1, 2)

    @pytest.mark.parametrize(
        "size,n_f,frac,pruned",
        [
            (2, 4, SizeFraction(1, 2), True),
            (3, 6, SizeFraction(1, 2), True),
            (4, 6, SizeFraction(1, 2), False),
            (2, 8, SizeFraction(1, 4), True),
            (3, 8, SizeFraction(1, 4), False),
            (6, 8, SizeFraction(3, 4), True),
            (7, 8, SizeFraction(3, 4), False),
        ],
    )
    def test_integer_rule(self, size, n_f, frac, pruned):
        """size <= N_F * frac, equality included."""
        assert is_pruned(size, n_f, frac) is pruned

    def test_raising_fraction_never_unprunes(self):
        """Fixed components: anything pruned at 1/4 stays pruned at 1/2 and 3/4."""
        rnd = random.Random(21)
        fracs = [SizeFraction(1, 4), SizeFraction(1, 2), SizeFraction(3, 4)]
        for _ in range(300):
            n_f = rnd.randint(1, 30)
            sizes = [rnd.randint(1, 2 * n_f) for _ in range(rnd.randint(1, 8))]
            components = [Component.of([("v", f, c) for f in range(size)]) for c, size in enumerate(sizes)]
            previous = set()
            for frac in fracs:
                result = prune_components(components, n_f, frac, video_id="v")
                pruned = {c.member_ids for c in result.pruned_components}
                assert previous <= pruned
                assert len(result.components) == len(components)
                previous = pruned

    def test_pruned_components_retained(self):
        components = [Component.of([("v", 0, 0), ("v", 1, 0), ("v", 2, 0)]), Component.of([("v", 0, 1)])]
        result = prune_components(components, 3, "1/2", video_id="v")
        assert result.n_records == 4
        assert len(result.pruned_components) == 1
        assert result.kept_ids == (("v", 0, 0), ("v", 1, 0), ("v", 2, 0))

    def test_negative_n_f(self):
        with pytest.raises(ValueError):
            prune_components([], -1)

    def test_input_order_invariance(self):
        records = list(walkthrough_group().records)
        expected = clean_video(VideoGroup.from_records("fig", records))
        rnd = random.Random(5)
        for _ in range(10):
            rnd.shuffle(records)
            assert clean_video(VideoGroup.from_records("fig", records)) == expected

    def test_single_frame_video(self):
        """N_F = 1: a single face has size 1 > 1/2 and is kept."""
        group = VideoGroup.from_records("v", [make_record("v", 0, 0, axis(0))])
        result = clean_video(group)
        assert [c.kept for c in result.components] == [True]


class TestBaseline:
    """Tests for the no-cleaning view."""

    def test_one_kept_component(self):
        group = walkthrough_group()
        result = baseline_component_set(group)
        assert len(result.components) == 1
        assert result.kept_ids == tuple(sorted(group.record_ids))
        assert result.theta is None

    def test_empty_group(self):
        assert baseline_component_set(VideoGroup.from_records("v", [])).components == ()
