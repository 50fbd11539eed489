"""
Disjoint-union batches of encoded graphs.

Node indices of graph b are shifted by the number of nodes of graphs 0..b-1. After the
real edges, every batch carries one virtual self edge (i, i) per node so that attention
over N_i ∪ {i} is a plain grouped softmax over incoming edges.
"""

# Standard imports
from collections.abc import Sequence
from dataclasses import dataclass

# Third party imports
import numpy as np

# Internal imports
from src.hoprewire.errors import PositionalEncodingError
from src.hoprewire.rewire import RewiredGraph

MODEL_PE_KINDS = ("short", "adj", "lp", "none")


@dataclass(frozen=True)
class GraphBatch:
    """Several graphs merged into one.

    Attributes:
        num_graphs: Number of graphs B
        num_nodes: Total node count N
        num_edges: Total real edge count M (self edges excluded)
        node_features: (N, d_v)
        edge_features: (M, d_e)
        src: (M + N,) message sources, self edges last
        dst: (M + N,) message targets
        node_graph: (N,) graph index of every node
        graph_offsets: (B,) index of node 0 of every graph
        graph_sizes: (B,) node count of every graph
        cls_index: (B,) global CLS node index per graph, or None if any graph lacks one
        pe_kind: Positional encoding kind of all graphs (``"none"`` if absent)
        edge_pe: (M, w) edge encoding or None
        node_pe: (N, q) node encoding or None
        graph_labels: (B,) labels or None
        node_labels: (N,) labels (-1 = unlabelled) or None
    """

    num_graphs: int
    num_nodes: int
    num_edges: int
    node_features: np.ndarray
    edge_features: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    node_graph: np.ndarray
    graph_offsets: np.ndarray
    graph_sizes: np.ndarray
    cls_index: np.ndarray | None
    pe_kind: str
    edge_pe: np.ndarray | None
    node_pe: np.ndarray | None
    graph_labels: np.ndarray | None
    node_labels: np.ndarray | None

    @property
    def root_index(self) -> np.ndarray:
        """Global index of node 0 of every graph."""
        return self.graph_offsets


def batch_pe_kind(graphs: Sequence[RewiredGraph]) -> str:
    kinds = {"none" if g.encoding is None else g.encoding.kind for g in graphs}
    if len(kinds) != 1:
        raise PositionalEncodingError(f"mixed positional encodings in one batch: {sorted(kinds)}")
    return kinds.pop()


def collate(graphs: Sequence[RewiredGraph], pe_kind: str | None = None) -> GraphBatch:
    """Merge rewired graphs into a GraphBatch.

    Args:
        graphs: Non-empty list of graphs sharing d_v, d_e and encoding kind
        pe_kind: Encoding the model uses; ``"none"`` ignores any stored encoding

    Raises:
        PositionalEncodingError: If the graphs do not carry the requested encoding
    """
    if not graphs:
        raise ValueError("cannot collate an empty list of graphs")
    stored = batch_pe_kind(graphs)
    pe_kind = stored if pe_kind is None else pe_kind
    if pe_kind not in MODEL_PE_KINDS:
        raise PositionalEncodingError(f"unknown positional encoding kind {pe_kind!r}")
    if pe_kind != "none" and stored != pe_kind:
        raise PositionalEncodingError(
            f"model expects '{pe_kind}' encodings but the graphs carry '{stored}'"
        )

    sizes = np.array([g.graph.num_nodes for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    num_nodes = int(sizes.sum())
    edges = np.concatenate(
        [g.graph.edges + offset for g, offset in zip(graphs, offsets)]
    ).reshape(-1, 2)
    self_loops = np.arange(num_nodes, dtype=np.int64)

    cls_index = None
    if all(g.cls_node is not None for g in graphs):
        cls_index = offsets + np.array([g.cls_node for g in graphs], dtype=np.int64)

    edge_pe = node_pe = None
    if pe_kind in ("short", "adj"):
        edge_pe = np.concatenate([g.encoding.values for g in graphs])  # type: ignore[union-attr]
    elif pe_kind == "lp":
        node_pe = np.concatenate([g.encoding.values for g in graphs])  # type: ignore[union-attr]

    graph_labels = None
    if all(g.graph.graph_label is not None for g in graphs):
        graph_labels = np.array([g.graph.graph_label for g in graphs])
    node_labels = None
    if all(g.graph.node_labels is not None for g in graphs):
        node_labels = np.concatenate([g.graph.node_labels for g in graphs])  # type: ignore[misc]

    return GraphBatch(
        num_graphs=len(graphs),
        num_nodes=num_nodes,
        num_edges=int(edges.shape[0]),
        node_features=np.concatenate([g.graph.node_features for g in graphs]),
        edge_features=np.concatenate([g.graph.edge_features for g in graphs]),
        src=np.concatenate([edges[:, 0], self_loops]),
        dst=np.concatenate([edges[:, 1], self_loops]),
        node_graph=np.repeat(np.arange(len(graphs), dtype=np.int64), sizes),
        graph_offsets=offsets,
        graph_sizes=sizes,
        cls_index=cls_index,
        pe_kind=pe_kind,
        edge_pe=edge_pe,
        node_pe=node_pe,
        graph_labels=graph_labels,
        node_labels=node_labels,
    )
