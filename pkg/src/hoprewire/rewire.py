"""
Topological rewiring: r-hop receptive-field expansion and CLS-node insertion.

Every edge of a rewired graph carries a provenance tag. Edges are kept in a canonical
order: original edges in input order, then hop-added edges sorted by (u, v), then CLS
edges as (cls, 0), (0, cls), (cls, 1), (1, cls), ...
"""

# Standard imports
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Any

# Third party imports
import numpy as np
from loguru import logger

# Internal imports
from src.hoprewire.errors import GraphValidationError, NotRecoverableError, RewireError
from src.hoprewire.graph import AttributedGraph
from src.hoprewire.linalg import all_pairs_hop_distances

EDGE_PE_KINDS = ("short", "adj")
NODE_PE_KINDS = ("lp",)
PE_KINDS = EDGE_PE_KINDS + NODE_PE_KINDS


class Provenance(IntEnum):
    """Origin of an edge in a rewired graph."""

    ORIGINAL = 0
    HOP_ADDED = 1
    CLS = 2


@dataclass(frozen=True, eq=False)
class PositionalEncoding:
    """One positional encoding attached to a rewired graph.

    Attributes:
        kind: ``"short"`` or ``"adj"`` (per edge, int64) or ``"lp"`` (per node, float64)
        values: (m, width) or (n, q) array
        meta: ``{"r": int}`` for edge kinds, ``{"q": int, "padded": int}`` for ``"lp"``
    """

    kind: str
    values: np.ndarray
    meta: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in PE_KINDS:
            raise GraphValidationError(f"unknown positional encoding kind {self.kind!r}")
        dtype = np.float64 if self.kind in NODE_PE_KINDS else np.int64
        values = np.asarray(self.values, dtype=dtype)
        if values.ndim != 2:
            raise GraphValidationError(f"{self.kind} encoding must be 2-D, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def per_edge(self) -> bool:
        return self.kind in EDGE_PE_KINDS

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PositionalEncoding):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and self.meta == other.meta
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class RewiredGraph:
    """A modified graph G' with the bookkeeping needed to undo the modification.

    Attributes:
        graph: The rewired graph G'
        edge_provenance: Per-edge ``Provenance`` codes, ``None`` when stripped
        r: Expansion radius (1 means no expansion)
        cls_node: Index of the CLS node (always the last node) or ``None``
        constant_edge_feature: C_e, feature of hop-added and CLS edges
        constant_node_feature: C_v, feature of the CLS node
        encoding: Optional positional encoding
    """

    graph: AttributedGraph
    edge_provenance: np.ndarray | None
    r: int = 1
    cls_node: int | None = None
    constant_edge_feature: np.ndarray = field(default=None)  # type: ignore[assignment]
    constant_node_feature: np.ndarray = field(default=None)  # type: ignore[assignment]
    encoding: PositionalEncoding | None = None

    def __post_init__(self) -> None:
        g = self.graph
        if self.r < 1:
            raise GraphValidationError(f"r must be >= 1, got {self.r}")
        c_e = _constant(self.constant_edge_feature, g.edge_dim, "edge")
        c_v = _constant(self.constant_node_feature, g.node_dim, "node")
        object.__setattr__(self, "constant_edge_feature", c_e)
        object.__setattr__(self, "constant_node_feature", c_v)

        if self.cls_node is not None and self.cls_node != g.num_nodes - 1:
            raise GraphValidationError(
                f"cls_node must be the last node ({g.num_nodes - 1}), got {self.cls_node}"
            )
        if self.edge_provenance is not None:
            provenance = np.asarray(self.edge_provenance, dtype=np.int64).reshape(-1)
            if provenance.shape[0] != g.num_edges:
                raise GraphValidationError(
                    f"edge_provenance has {provenance.shape[0]} tags for {g.num_edges} edges"
                )
            if provenance.size and (provenance.min() < 0 or provenance.max() > 2):
                raise GraphValidationError("edge_provenance tags must be 0, 1 or 2")
            self._check_cls_edges(provenance)
            provenance.setflags(write=False)
            object.__setattr__(self, "edge_provenance", provenance)

        pe = self.encoding
        if pe is not None:
            expected = g.num_edges if pe.per_edge else g.num_nodes
            if pe.values.shape[0] != expected:
                raise GraphValidationError(
                    f"{pe.kind} encoding has {pe.values.shape[0]} rows, expected {expected}"
                )

    def _check_cls_edges(self, provenance: np.ndarray) -> None:
        edges = self.graph.edges
        is_cls = provenance == Provenance.CLS
        if self.cls_node is None:
            if is_cls.any():
                raise GraphValidationError("cls edges present without a cls node")
            return
        touches = (edges[:, 0] == self.cls_node) | (edges[:, 1] == self.cls_node)
        if not np.array_equal(touches, is_cls):
            raise GraphValidationError("edges touching the cls node must be exactly the cls edges")

    @property
    def has_provenance(self) -> bool:
        return self.edge_provenance is not None

    @property
    def num_original_nodes(self) -> int:
        return self.graph.num_nodes - (0 if self.cls_node is None else 1)

    def edge_count(self, tag: Provenance) -> int:
        """Number of edges with the given provenance tag."""
        if self.edge_provenance is None:
            raise NotRecoverableError("edge provenance was stripped from this graph")
        return int(np.count_nonzero(self.edge_provenance == tag))

    def meta(self) -> dict[str, Any]:
        """Rewiring parameters as a JSON-friendly mapping."""
        return {
            "r": self.r,
            "cls_node": self.cls_node,
            "c_e": self.constant_edge_feature.tolist(),
            "c_v": self.constant_node_feature.tolist(),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RewiredGraph):
            return NotImplemented
        if (self.edge_provenance is None) != (other.edge_provenance is None):
            return False
        return (
            self.graph == other.graph
            and (
                self.edge_provenance is None
                or np.array_equal(self.edge_provenance, other.edge_provenance)
            )
            and self.r == other.r
            and self.cls_node == other.cls_node
            and np.array_equal(self.constant_edge_feature, other.constant_edge_feature)
            and np.array_equal(self.constant_node_feature, other.constant_node_feature)
            and self.encoding == other.encoding
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        kind = None if self.encoding is None else self.encoding.kind
        return f"RewiredGraph({self.graph!r}, r={self.r}, cls_node={self.cls_node}, pe={kind})"


def _constant(values: Any, dim: int, what: str) -> np.ndarray:
    if values is None:
        constant = np.zeros(dim)
    else:
        constant = np.asarray(values, dtype=float).reshape(-1)
    if constant.shape[0] != dim:
        raise RewireError(
            f"constant {what} feature has dimension {constant.shape[0]}, expected {dim}"
        )
    constant.setflags(write=False)
    return constant


def as_rewired(g: AttributedGraph | RewiredGraph) -> RewiredGraph:
    """Wrap a plain graph as the identity rewiring (every edge original, r = 1)."""
    if isinstance(g, RewiredGraph):
        return g
    return RewiredGraph(graph=g, edge_provenance=np.zeros(g.num_edges, dtype=np.int64))


def strip_provenance(rw: RewiredGraph) -> RewiredGraph:
    """Drop the provenance tags, leaving recovery to a lossless positional encoding."""
    return replace(rw, edge_provenance=None)


def with_encoding(rw: RewiredGraph, encoding: PositionalEncoding) -> RewiredGraph:
    """Attach an encoding, replacing any previous one."""
    if rw.encoding is not None:
        logger.warning(f"Replacing existing '{rw.encoding.kind}' encoding with '{encoding.kind}'")
    return replace(rw, encoding=encoding)


def _require_provenance(rw: RewiredGraph, action: str) -> np.ndarray:
    if rw.edge_provenance is None:
        raise RewireError(f"{action} needs edge provenance")
    return rw.edge_provenance


def _without_cls_node(
    g: AttributedGraph, keep_edges: np.ndarray, cls_node: int | None
) -> AttributedGraph:
    """Subgraph on the kept edges with the CLS node (if any) removed and nodes reindexed."""
    edges = g.edges[keep_edges]
    node_features = g.node_features
    node_labels = g.node_labels
    num_nodes = g.num_nodes
    if cls_node is not None:
        keep_nodes = np.arange(g.num_nodes) != cls_node
        edges = edges - (edges > cls_node)
        node_features = node_features[keep_nodes]
        node_labels = None if node_labels is None else node_labels[keep_nodes]
        num_nodes -= 1
    return AttributedGraph(
        num_nodes=num_nodes,
        edges=edges,
        node_features=node_features.copy(),
        edge_features=g.edge_features[keep_edges].copy(),
        node_labels=None if node_labels is None else node_labels.copy(),
        graph_label=g.graph_label,
    )


def original_subgraph(rw: RewiredGraph) -> AttributedGraph:
    """The input graph G: edges tagged original, CLS node removed."""
    provenance = _require_provenance(rw, "original_subgraph")
    return _without_cls_node(rw.graph, provenance == Provenance.ORIGINAL, rw.cls_node)


def expand_receptive_field(
    g: AttributedGraph | RewiredGraph, r: int, c_e: np.ndarray | None = None
) -> RewiredGraph:
    """Connect every pair of nodes within r hops of each other in the original graph.

    Distances are direction-ignoring and measured on the original subgraph, so expanding
    an already rewired graph replaces its hop-added edges and keeps its CLS edges.

    Args:
        g: Input graph or rewired graph
        r: Expansion radius (>= 1); r = 1 adds nothing
        c_e: Feature of the added edges, defaults to the graph's current constant (zeros)

    Returns:
        The rewired graph with provenance tags; any positional encoding is dropped
    """
    if r < 1:
        raise RewireError(f"r must be >= 1, got {r}")
    base = as_rewired(g)
    provenance = _require_provenance(base, "expansion")
    if c_e is None:
        c_e = base.constant_edge_feature
    c_e = _constant(c_e, base.graph.edge_dim, "edge")

    original = original_subgraph(base)
    distances = all_pairs_hop_distances(original, cap=r)
    added = np.argwhere(distances >= 2).astype(np.int64).reshape(-1, 2)

    is_original = provenance == Provenance.ORIGINAL
    is_cls = provenance == Provenance.CLS
    edges = np.concatenate([base.graph.edges[is_original], added, base.graph.edges[is_cls]])
    edge_features = np.concatenate(
        [
            base.graph.edge_features[is_original],
            np.tile(c_e, (added.shape[0], 1)).reshape(added.shape[0], base.graph.edge_dim),
            base.graph.edge_features[is_cls],
        ]
    )
    new_provenance = np.concatenate(
        [
            np.full(int(is_original.sum()), Provenance.ORIGINAL, dtype=np.int64),
            np.full(added.shape[0], Provenance.HOP_ADDED, dtype=np.int64),
            np.full(int(is_cls.sum()), Provenance.CLS, dtype=np.int64),
        ]
    )
    if base.encoding is not None:
        logger.debug(f"Dropping '{base.encoding.kind}' encoding after expansion")
    logger.debug(f"Expanded graph with r={r}: {added.shape[0]} hop-added edges")
    return RewiredGraph(
        graph=replace(base.graph, edges=edges, edge_features=edge_features),
        edge_provenance=new_provenance,
        r=r,
        cls_node=base.cls_node,
        constant_edge_feature=c_e,
        constant_node_feature=base.constant_node_feature,
    )


def add_cls_node(
    g: AttributedGraph | RewiredGraph,
    c_v: np.ndarray | None = None,
    c_e: np.ndarray | None = None,
) -> RewiredGraph:
    """Append a CLS node connected in both directions to every node.

    Args:
        g: Input graph or rewired graph without a CLS node
        c_v: CLS node feature, defaults to the current constant (zeros)
        c_e: CLS edge feature, defaults to the current constant (zeros)

    Returns:
        The rewired graph with the CLS node as its last node

    Raises:
        RewireError: If a CLS node is already present or a constant has the wrong size
    """
    base = as_rewired(g)
    if base.cls_node is not None:
        raise RewireError(f"graph already has a CLS node at index {base.cls_node}")
    provenance = _require_provenance(base, "CLS insertion")
    graph = base.graph
    c_v = _constant(base.constant_node_feature if c_v is None else c_v, graph.node_dim, "node")
    c_e = _constant(base.constant_edge_feature if c_e is None else c_e, graph.edge_dim, "edge")

    n = graph.num_nodes
    cls = n
    nodes = np.arange(n, dtype=np.int64)
    cls_edges = np.empty((2 * n, 2), dtype=np.int64)
    cls_edges[0::2, 0] = cls
    cls_edges[0::2, 1] = nodes
    cls_edges[1::2, 0] = nodes
    cls_edges[1::2, 1] = cls

    node_labels = graph.node_labels
    if node_labels is not None:
        node_labels = np.append(node_labels, -1)
    new_graph = AttributedGraph(
        num_nodes=n + 1,
        edges=np.concatenate([graph.edges, cls_edges]),
        node_features=np.vstack([graph.node_features, c_v.reshape(1, -1)]),
        edge_features=np.vstack(
            [graph.edge_features, np.tile(c_e, (2 * n, 1)).reshape(2 * n, graph.edge_dim)]
        ),
        node_labels=node_labels,
        graph_label=graph.graph_label,
    )
    return RewiredGraph(
        graph=new_graph,
        edge_provenance=np.concatenate(
            [provenance, np.full(2 * n, Provenance.CLS, dtype=np.int64)]
        ),
        r=base.r,
        cls_node=cls,
        constant_edge_feature=c_e,
        constant_node_feature=c_v,
    )


def recover_original(rw: RewiredGraph) -> AttributedGraph:
    """Rebuild the pre-rewiring graph.

    Uses the provenance tags when present, otherwise the 1-ring of a lossless encoding:
    shortest-path value 1 or first adjacency-power coordinate 1.

    Raises:
        NotRecoverableError: If neither provenance nor a lossless encoding is available
    """
    if rw.edge_provenance is not None:
        return original_subgraph(rw)
    pe = rw.encoding
    if pe is None or not pe.per_edge:
        kind = "no" if pe is None else f"a '{pe.kind}'"
        raise NotRecoverableError(
            f"not recoverable: no edge provenance and {kind} positional encoding"
        )
    if pe.values.shape[1] == 0:
        raise NotRecoverableError(f"not recoverable: empty '{pe.kind}' encoding")
    one_ring = pe.values[:, 0] == 1
    return _without_cls_node(rw.graph, one_ring, rw.cls_node)
