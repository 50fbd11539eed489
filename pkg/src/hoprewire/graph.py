"""
Attributed graph data model and graph statistics.

Edges are stored directed; an undirected input is represented with both directions.
Reachability (diameter, hop distances) ignores edge direction.
"""

# Standard imports
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

# Third party imports
import numpy as np
from loguru import logger

# Internal imports
from src.hoprewire.errors import GraphValidationError
from src.hoprewire.linalg import UNREACHABLE, all_pairs_hop_distances

INFINITE_DIAMETER = math.inf


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _as_matrix(values: Any, rows: int, name: str, dtype: type) -> np.ndarray:
    if values is None:
        return np.zeros((rows, 0), dtype=dtype)
    matrix = np.asarray(values, dtype=dtype)
    if matrix.ndim == 1 and matrix.size == 0:
        matrix = matrix.reshape(rows, 0) if rows == 0 else matrix.reshape(0, 0)
    if matrix.ndim != 2:
        raise GraphValidationError(f"{name} must be a 2-D array, got shape {matrix.shape}")
    return matrix


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Directed attributed graph G = (V, E, f_v, f_e).

    Attributes:
        num_nodes: Number of nodes |V|
        edges: (m, 2) int64 array of directed pairs (u, v), 0-based
        node_features: (num_nodes, d_v) float64 array, d_v may be 0
        edge_features: (m, d_e) float64 array aligned with ``edges``, d_e may be 0
        node_labels: Optional (num_nodes,) int64 array of node classes
        graph_label: Optional scalar label (int for classification, float for regression)
    """

    num_nodes: int
    edges: np.ndarray
    node_features: np.ndarray = field(default=None)  # type: ignore[assignment]
    edge_features: np.ndarray = field(default=None)  # type: ignore[assignment]
    node_labels: np.ndarray | None = None
    graph_label: int | float | None = None

    def __post_init__(self) -> None:
        if self.num_nodes < 0:
            raise GraphValidationError(f"num_nodes must be >= 0, got {self.num_nodes}")
        edges = np.asarray(self.edges, dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 2)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise GraphValidationError(f"edges must have shape (m, 2), got {edges.shape}")
        num_edges = edges.shape[0]

        node_features = _as_matrix(self.node_features, self.num_nodes, "node_features", float)
        edge_features = _as_matrix(self.edge_features, num_edges, "edge_features", float)
        if node_features.shape[0] != self.num_nodes:
            if node_features.size == 0:
                node_features = np.zeros((self.num_nodes, 0))
            else:
                raise GraphValidationError(
                    f"node_features has {node_features.shape[0]} rows for "
                    f"{self.num_nodes} nodes"
                )
        if edge_features.shape[0] != num_edges:
            if edge_features.size == 0:
                edge_features = np.zeros((num_edges, 0))
            else:
                raise GraphValidationError(
                    f"edge_features has {edge_features.shape[0]} rows for {num_edges} edges"
                )

        node_labels = self.node_labels
        if node_labels is not None:
            node_labels = np.asarray(node_labels, dtype=np.int64).reshape(-1)
            if node_labels.shape[0] != self.num_nodes:
                raise GraphValidationError(
                    f"node_labels has {node_labels.shape[0]} entries for "
                    f"{self.num_nodes} nodes"
                )
            node_labels = _frozen(node_labels)

        graph_label = self.graph_label
        if isinstance(graph_label, np.integer):
            graph_label = int(graph_label)
        elif isinstance(graph_label, np.floating):
            graph_label = float(graph_label)

        object.__setattr__(self, "graph_label", graph_label)
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "node_features", _frozen(node_features))
        object.__setattr__(self, "edge_features", _frozen(edge_features))
        object.__setattr__(self, "node_labels", node_labels)
        self.validate()

    def validate(self) -> None:
        """Check the structural invariants of the graph.

        Raises:
            GraphValidationError: If an endpoint is out of range, an edge is a self-loop or
                a directed edge is duplicated
        """
        if self.num_edges == 0:
            return
        if self.edges.min() < 0 or self.edges.max() >= self.num_nodes:
            raise GraphValidationError("endpoint out of range")
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            raise GraphValidationError("self-loop edge")
        keys = self.edges[:, 0] * max(self.num_nodes, 1) + self.edges[:, 1]
        if np.unique(keys).shape[0] != keys.shape[0]:
            raise GraphValidationError("duplicate directed edge")

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def node_dim(self) -> int:
        return int(self.node_features.shape[1])

    @property
    def edge_dim(self) -> int:
        return int(self.edge_features.shape[1])

    def edge_set(self) -> set[tuple[int, int]]:
        """Return the directed edges as a set of (u, v) tuples."""
        return {(int(u), int(v)) for u, v in self.edges}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        if (self.node_labels is None) != (other.node_labels is None):
            return False
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.edges, other.edges)
            and self.node_features.shape == other.node_features.shape
            and np.array_equal(self.node_features, other.node_features)
            and self.edge_features.shape == other.edge_features.shape
            and np.array_equal(self.edge_features, other.edge_features)
            and (self.node_labels is None or np.array_equal(self.node_labels, other.node_labels))
            and self.graph_label == other.graph_label
            and type(self.graph_label) is type(other.graph_label)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"AttributedGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges}, "
            f"d_v={self.node_dim}, d_e={self.edge_dim}, graph_label={self.graph_label!r})"
        )


@dataclass(frozen=True)
class GraphStats:
    """Summary statistics of one graph.

    Attributes:
        density: |E| / |V|^2
        diameter: Largest hop distance, ``INFINITE_DIAMETER`` when disconnected
        homophily: Fraction of same-label edges, present iff node labels exist
        num_edges: Number of directed edges
    """

    density: float
    diameter: int | float
    homophily: float | None
    num_edges: int


@dataclass(frozen=True)
class HomophilyBucket:
    """A contiguous slice of a dataset sorted by homophily."""

    low: float | None
    high: float | None
    indices: list[int]


def check_dataset_dims(graphs: Sequence[AttributedGraph]) -> None:
    """Ensure every graph of a dataset shares d_v and d_e.

    Raises:
        GraphValidationError: On the first graph whose dimensions differ from graph 0
    """
    if not graphs:
        return
    d_v, d_e = graphs[0].node_dim, graphs[0].edge_dim
    for index, graph in enumerate(graphs[1:], start=1):
        if graph.node_dim != d_v or graph.edge_dim != d_e:
            raise GraphValidationError(
                f"dimension mismatch at graph {index}: (d_v={graph.node_dim}, "
                f"d_e={graph.edge_dim}) vs (d_v={d_v}, d_e={d_e})"
            )


def density(g: AttributedGraph) -> float:
    """Directed edge density |E| / |V|^2."""
    if g.num_nodes < 1:
        raise GraphValidationError("density needs at least one node")
    return g.num_edges / g.num_nodes**2


def homophily(g: AttributedGraph) -> float:
    """Fraction of edges that connect nodes with the same label.

    Raises:
        GraphValidationError: If the graph has no node labels or no edges
    """
    if g.node_labels is None:
        raise GraphValidationError("homophily needs node labels")
    if g.num_edges == 0:
        raise GraphValidationError("homophily needs at least one edge")
    same = g.node_labels[g.edges[:, 0]] == g.node_labels[g.edges[:, 1]]
    return float(np.count_nonzero(same)) / g.num_edges


def diameter(g: AttributedGraph) -> int | float:
    """Largest direction-ignoring hop distance; ``INFINITE_DIAMETER`` when disconnected."""
    if g.num_nodes < 1:
        raise GraphValidationError("diameter needs at least one node")
    distances = all_pairs_hop_distances(g)
    if np.any(distances == UNREACHABLE):
        return INFINITE_DIAMETER
    return int(distances.max())


def max_finite_distance(graphs: Sequence[AttributedGraph]) -> int:
    """Largest finite hop distance between any two nodes of any graph in the dataset."""
    best = 0
    for g in graphs:
        if g.num_nodes == 0:
            continue
        best = max(best, int(all_pairs_hop_distances(g).max()))
    return best


def graph_stats(g: AttributedGraph) -> GraphStats:
    """Compute density, diameter, homophily (when labelled) and edge count."""
    homophily_score = None
    if g.node_labels is not None and g.num_edges > 0:
        homophily_score = homophily(g)
    return GraphStats(
        density=density(g),
        diameter=diameter(g),
        homophily=homophily_score,
        num_edges=g.num_edges,
    )


def homophily_buckets(graphs: Sequence[AttributedGraph], k: int) -> list[HomophilyBucket]:
    """Sort graphs by homophily and cut them into k contiguous, near-equal buckets.

    The first ``len(graphs) % k`` buckets receive one extra graph.

    Args:
        graphs: Labelled graphs
        k: Number of buckets (>= 1)

    Returns:
        Buckets in ascending homophily order with their score range and graph indices
    """
    if k < 1:
        raise ValueError(f"bucket count must be >= 1, got {k}")
    scores = np.array([homophily(g) for g in graphs], dtype=float)
    order = np.argsort(scores, kind="stable")
    buckets = []
    for chunk in np.array_split(order, k):
        indices = [int(i) for i in chunk]
        if indices:
            low, high = float(scores[indices[0]]), float(scores[indices[-1]])
        else:
            low = high = None
        buckets.append(HomophilyBucket(low=low, high=high, indices=indices))
    logger.debug(f"Split {len(graphs)} graphs into {k} homophily buckets")
    return buckets
