"""
Face graph construction, connected components and size-based pruning.

Pipeline for one video:
1. Normalize every embedding and compute all pairwise similarities
   (dot products of unit vectors) in row blocks; near-threshold pairs are
   re-decided exactly.
2. Connect faces i, j when s(i, j) > theta (strict).
3. Find connected components with a disjoint-set structure.
4. Flag components with size <= N_F * fraction as pruned (exact integer
   arithmetic). Nothing is deleted.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, MissingEmbedding, RecordId
from .model import (
    Component,
    ComponentSet,
    Embedding,
    SimilarityThreshold,
    SizeFraction,
    VideoGroup,
    normalize_embedding,
)

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 256
# Blocked products within this distance of theta are re-decided with `similarity`.
TIE_TOLERANCE = 1e-9

ThetaLike = Union[float, SimilarityThreshold]
FractionLike = Union[str, SizeFraction]


class UnionFind:
    """
    Disjoint sets over the integers 0..n-1.

    Union by rank plus path compression; `find` is iterative so deep chains
    never hit the recursion limit.
    """

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        """Merge the sets holding x and y. Returns False if already merged."""
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1
        return True

    def groups(self) -> Dict[int, List[int]]:
        """Map each root to the sorted members of its set."""
        out: Dict[int, List[int]] = {}
        for x in range(len(self.parent)):
            out.setdefault(self.find(x), []).append(x)
        return out


@dataclass(frozen=True)
class FaceGraph:
    """Undirected similarity graph over the faces of one video."""

    node_ids: Tuple[RecordId, ...]
    edges: FrozenSet[Tuple[int, int]]
    theta: float

    def __post_init__(self):
        n = len(self.node_ids)
        for i, j in self.edges:
            if not 0 <= i < j < n:
                raise ValueError(f"edge ({i}, {j}) must satisfy 0 <= i < j < {n}")

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def adjacency(self) -> List[List[int]]:
        adj: List[List[int]] = [[] for _ in self.node_ids]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj


def similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Dot-product similarity of two normalized embeddings.

    Summed with math.fsum, so the value depends only on the two vectors and
    never on memory layout or on how a matrix product is blocked.

    Raises:
        DimensionMismatch: If the embeddings have different lengths
    """
    if len(a) != len(b):
        raise DimensionMismatch(len(a), len(b))
    return math.fsum(np.multiply(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)).tolist())


def _embedding_matrix(group: VideoGroup) -> np.ndarray:
    rows: List[Embedding] = []
    for record in group.records:
        if record.embedding is None:
            raise MissingEmbedding(record.record_id, record.line_no)
        rows.append(normalize_embedding(record.embedding, record.record_id))
    if not rows:
        return np.zeros((0, 0), dtype=np.float64)
    dim = len(rows[0])
    for row in rows:
        if len(row) != dim:
            raise DimensionMismatch(dim, len(row))
    return np.asarray(rows, dtype=np.float64)


def build_face_graph(
    group: VideoGroup, theta: ThetaLike = 0.8, block_size: int = DEFAULT_BLOCK_SIZE
) -> FaceGraph:
    """
    Build the face graph of one video.

    All K(K-1)/2 pairs are evaluated exactly. Faces from the same frame may
    be connected. Similarities are computed one block of rows at a time so
    the K x K matrix is never materialized for large K. Pairs whose blocked
    product lies within TIE_TOLERANCE of theta are decided by `similarity`,
    so edge (i, j) exists exactly when similarity(e_i, e_j) > theta and the
    block size never changes which edges are produced.

    Args:
        group: Video group whose records all carry embeddings
        theta: Edge threshold; an edge needs similarity strictly above it
        block_size: Rows per similarity block

    Returns:
        FaceGraph with node order equal to the group's record order

    Raises:
        MissingEmbedding: If any record lacks an embedding
    """
    threshold = SimilarityThreshold.coerce(theta).theta
    matrix = _embedding_matrix(group)
    k = matrix.shape[0]
    edges = set()

    for start in range(0, k, max(1, block_size)):
        stop = min(start + block_size, k)
        block = matrix[start:stop] @ matrix.T
        rows, cols = np.nonzero(block > threshold + TIE_TOLERANCE)
        for r, c in zip(rows.tolist(), cols.tolist()):
            i = start + r
            if c > i:
                edges.add((i, c))
        rows, cols = np.nonzero(np.abs(block - threshold) <= TIE_TOLERANCE)
        for r, c in zip(rows.tolist(), cols.tolist()):
            i = start + r
            if c > i and similarity(matrix[i], matrix[c]) > threshold:
                edges.add((i, c))

    return FaceGraph(node_ids=group.record_ids, edges=frozenset(edges), theta=threshold)


def _component_order(component: Component):
    return (-component.size, component.min_member)


def connected_components(graph: FaceGraph) -> List[Component]:
    """
    Connected components of a face graph.

    Every node lands in exactly one component; isolated nodes are
    singletons. Components are sorted by descending size, then by their
    smallest member id.
    """
    uf = UnionFind(graph.n_nodes)
    for i, j in graph.edges:
        uf.union(i, j)
    components = [
        Component.of(graph.node_ids[i] for i in members)
        for members in uf.groups().values()
    ]
    return sorted(components, key=_component_order)


def is_pruned(size: int, n_f: int, frac: SizeFraction) -> bool:
    """size <= n_f * frac, evaluated without division."""
    return size * frac.denominator <= n_f * frac.numerator


def prune_components(
    components: Sequence[Component],
    n_f: int,
    frac: FractionLike = SizeFraction(),
    video_id: Optional[str] = None,
    theta: Optional[float] = None,
) -> ComponentSet:
    """
    Flag components too small to be a real face track.

    A component is pruned iff size * denominator <= n_f * numerator. Pruned
    components stay in the result with kept=False.

    Args:
        components: Components of one video
        n_f: Number of frames with at least one detection
        frac: Size threshold as a fraction of n_f (default 1/2)
        video_id: Video the components belong to (inferred when omitted)
        theta: Similarity threshold the components were built with

    Returns:
        ComponentSet in deterministic component order
    """
    if n_f < 0:
        raise ValueError("n_f must be non-negative")
    fraction = SizeFraction.coerce(frac)
    flagged = [
        Component(c.member_ids, c.size, kept=not is_pruned(c.size, n_f, fraction))
        for c in sorted(components, key=_component_order)
    ]
    if video_id is None:
        video_id = flagged[0].min_member[0] if flagged else ""
    return ComponentSet(
        video_id=video_id,
        components=tuple(flagged),
        n_f=n_f,
        theta=theta,
        size_fraction=fraction,
    )


def clean_video(
    group: VideoGroup,
    theta: ThetaLike = 0.8,
    frac: FractionLike = SizeFraction(),
) -> ComponentSet:
    """
    Face-graph cleaning of one video: build graph, find components, prune.

    Deterministic for fixed inputs; record input order never changes the
    partition or the kept flags.
    """
    graph = build_face_graph(group, theta)
    components = connected_components(graph)
    result = prune_components(
        components, group.n_f, frac, video_id=group.video_id, theta=graph.theta
    )
    logger.debug(
        "%s: K=%d N_F=%d edges=%d components=%d kept=%d",
        group.video_id,
        len(group),
        group.n_f,
        len(graph.edges),
        len(result.components),
        len(result.kept_components),
    )
    return result


def baseline_component_set(group: VideoGroup) -> ComponentSet:
    """
    No-cleaning view of a video: every record in one kept component.

    Lets the baseline pipeline share the aggregation code path.
    """
    components: Tuple[Component, ...] = ()
    if group.records:
        components = (Component.of(group.record_ids, kept=True),)
    return ComponentSet(
        video_id=group.video_id,
        components=components,
        n_f=group.n_f,
        theta=None,
        size_fraction=None,
    )
