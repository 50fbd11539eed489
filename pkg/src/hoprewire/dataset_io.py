"""
JSONL dataset serialization.

One graph record per line; an optional first line ``{"gen_meta": {...}}`` records how the
dataset was generated. Rewired and encoded graphs add extension fields to the same record.
Files are written atomically (temporary file + rename).
"""

# Standard imports
import os
import tempfile
from collections.abc import Iterator, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any, Literal

# Third party imports
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

# Internal imports
from src.hoprewire.errors import GraphValidationError, HopRewireError
from src.hoprewire.graph import AttributedGraph
from src.hoprewire.rewire import PositionalEncoding, RewiredGraph, as_rewired


class RewireMeta(BaseModel):
    """Rewiring parameters stored with each rewired record."""

    model_config = ConfigDict(extra="forbid")

    r: int = Field(ge=1)
    cls_node: int | None = None
    c_e: list[float] = Field(default_factory=list)
    c_v: list[float] = Field(default_factory=list)


class GraphRecord(BaseModel):
    """Wire format of one graph (one JSONL line)."""

    model_config = ConfigDict(extra="forbid")

    num_nodes: int = Field(ge=0)
    edges: list[tuple[int, int]]
    node_feat: list[list[float]] | None = None
    edge_feat: list[list[float]] | None = None
    node_feat_dim: int | None = Field(default=None, ge=0)
    edge_feat_dim: int | None = Field(default=None, ge=0)
    node_labels: list[int] | None = None
    graph_label: int | float | None = None

    edge_provenance: list[int] | None = None
    rewire_meta: RewireMeta | None = None
    pe_kind: Literal["short", "adj", "lp"] | None = None
    edge_pe: list[list[int]] | None = None
    node_pe: list[list[float]] | None = None
    pe_meta: dict[str, int] | None = None

    @property
    def is_rewired(self) -> bool:
        return self.rewire_meta is not None or self.edge_provenance is not None


NumberedRecords = list[tuple[int, GraphRecord]]


class DatasetHeader(BaseModel):
    """Optional first line of a dataset file."""

    model_config = ConfigDict(extra="forbid")

    gen_meta: dict[str, Any]


def _features(rows: list[list[float]] | None, count: int, dim: int | None) -> np.ndarray:
    if rows is None or len(rows) == 0:
        return np.zeros((count, dim or 0))
    return np.asarray(rows, dtype=np.float64)


def record_to_graph(record: GraphRecord) -> AttributedGraph:
    """Build the (possibly rewired) AttributedGraph G' stored in a record."""
    edges = np.asarray(record.edges, dtype=np.int64).reshape(-1, 2)
    return AttributedGraph(
        num_nodes=record.num_nodes,
        edges=edges,
        node_features=_features(record.node_feat, record.num_nodes, record.node_feat_dim),
        edge_features=_features(record.edge_feat, edges.shape[0], record.edge_feat_dim),
        node_labels=record.node_labels,
        graph_label=record.graph_label,
    )


def _encoding_from_record(
    record: GraphRecord, num_nodes: int, num_edges: int
) -> PositionalEncoding:
    meta = dict(record.pe_meta or {})
    if record.pe_kind == "lp":
        width = meta.get("q", 0)
        rows = record.node_pe
        count = num_nodes
    else:
        width = 1 if record.pe_kind == "short" else meta.get("r", 0)
        rows = record.edge_pe
        count = num_edges
    if rows is None:
        raise GraphValidationError(f"pe_kind '{record.pe_kind}' without its encoding values")
    values = np.asarray(rows).reshape(count, width) if len(rows) == 0 else np.asarray(rows)
    return PositionalEncoding(str(record.pe_kind), values, meta)


def record_to_rewired(record: GraphRecord) -> RewiredGraph:
    """Build a RewiredGraph; plain records become the identity rewiring."""
    graph = record_to_graph(record)
    if not record.is_rewired:
        rewired = as_rewired(graph)
    else:
        meta = record.rewire_meta or RewireMeta(r=1)
        rewired = RewiredGraph(
            graph=graph,
            edge_provenance=(
                None
                if record.edge_provenance is None
                else np.asarray(record.edge_provenance, dtype=np.int64)
            ),
            r=meta.r,
            cls_node=meta.cls_node,
            constant_edge_feature=np.asarray(meta.c_e, dtype=float) if meta.c_e else None,
            constant_node_feature=np.asarray(meta.c_v, dtype=float) if meta.c_v else None,
        )
    if record.pe_kind is None:
        return rewired
    encoding = _encoding_from_record(record, graph.num_nodes, graph.num_edges)
    return replace(rewired, encoding=encoding)


def graph_to_record(item: AttributedGraph | RewiredGraph) -> GraphRecord:
    """Serialize a graph; feature arrays are omitted when their dimension is 0."""
    g = item.graph if isinstance(item, RewiredGraph) else item
    fields: dict[str, Any] = {"num_nodes": g.num_nodes, "edges": g.edges.tolist()}
    if g.node_dim:
        fields["node_feat"] = g.node_features.tolist()
        if g.num_nodes == 0:
            fields["node_feat_dim"] = g.node_dim
    if g.edge_dim:
        fields["edge_feat"] = g.edge_features.tolist()
        if g.num_edges == 0:
            fields["edge_feat_dim"] = g.edge_dim
    if g.node_labels is not None:
        fields["node_labels"] = g.node_labels.tolist()
    if g.graph_label is not None:
        fields["graph_label"] = g.graph_label

    if isinstance(item, RewiredGraph):
        if item.edge_provenance is not None:
            fields["edge_provenance"] = item.edge_provenance.tolist()
        fields["rewire_meta"] = RewireMeta(**item.meta())
        pe = item.encoding
        if pe is not None:
            fields["pe_kind"] = pe.kind
            fields["edge_pe" if pe.per_edge else "node_pe"] = pe.values.tolist()
            fields["pe_meta"] = dict(pe.meta)
    return GraphRecord(**fields)


def _numbered_lines(path: Path) -> Iterator[tuple[int, str]]:
    with path.open("r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if line.strip():
                yield number, line


def read_records(path: str | Path) -> tuple[dict[str, Any] | None, NumberedRecords]:
    """Parse a dataset file into its header and line-numbered records.

    Raises:
        FileNotFoundError: If the file does not exist
        GraphValidationError: On the first malformed line, naming its number
    """
    path = Path(path)
    header: dict[str, Any] | None = None
    records: NumberedRecords = []
    for number, line in _numbered_lines(path):
        if not records and header is None and line.lstrip().startswith('{"gen_meta"'):
            try:
                header = DatasetHeader.model_validate_json(line).gen_meta
                continue
            except ValidationError as exc:
                raise GraphValidationError(f"malformed gen_meta header, line {number}") from exc
        try:
            records.append((number, GraphRecord.model_validate_json(line)))
        except ValidationError as exc:
            first = exc.errors()[0]
            location = ".".join(str(part) for part in first["loc"]) or "record"
            raise GraphValidationError(
                f"invalid {location}: {first['msg']}, line {number}"
            ) from exc
    return header, records


def _build_all(records: NumberedRecords, build: Any) -> list[Any]:
    items = []
    dims: tuple[int, int] | None = None
    for number, record in records:
        try:
            item = build(record)
        except (HopRewireError, ValueError) as exc:
            raise GraphValidationError(f"{exc}, line {number}") from exc
        g = item.graph if isinstance(item, RewiredGraph) else item
        if dims is None:
            dims = (g.node_dim, g.edge_dim)
        elif (g.node_dim, g.edge_dim) != dims:
            raise GraphValidationError(
                f"dimension mismatch: (d_v={g.node_dim}, d_e={g.edge_dim}) vs "
                f"(d_v={dims[0]}, d_e={dims[1]}), line {number}"
            )
        items.append(item)
    return items


def load_dataset(path: str | Path) -> list[AttributedGraph]:
    """Load the graphs of a dataset file in file order.

    Rewired records load as their rewired graph G'; extension fields are ignored.
    """
    _, records = read_records(path)
    graphs = _build_all(records, record_to_graph)
    logger.debug(f"Loaded {len(graphs)} graphs from {path}")
    return graphs


def read_rewired_dataset(
    path: str | Path, require_rewired: bool = False
) -> tuple[dict[str, Any] | None, list[RewiredGraph]]:
    """Read a dataset once, returning its ``gen_meta`` header and its rewired graphs.

    Plain records load as the identity rewiring unless ``require_rewired`` is set.
    """
    header, records = read_records(path)
    if require_rewired:
        for number, record in records:
            if not record.is_rewired:
                raise GraphValidationError(
                    f"graph is not rewired, line {number}; run rewire first"
                )
    graphs = _build_all(records, record_to_rewired)
    logger.debug(f"Loaded {len(graphs)} rewired graphs from {path}")
    return header, graphs


def load_rewired_dataset(path: str | Path, require_rewired: bool = False) -> list[RewiredGraph]:
    """Load a dataset with its provenance, rewiring parameters and encodings."""
    return read_rewired_dataset(path, require_rewired)[1]


def load_header(path: str | Path) -> dict[str, Any] | None:
    """The ``gen_meta`` header of a dataset file, if any."""
    header, _ = read_records(path)
    return header


def write_atomic(path: str | Path, lines: Sequence[str]) -> None:
    """Write text lines to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            for line in lines:
                handle.write(line)
                handle.write("\n")
        os.replace(temp_name, path)
    except BaseException:
        Path(temp_name).unlink(missing_ok=True)
        raise


def save_dataset(
    graphs: Sequence[AttributedGraph | RewiredGraph],
    path: str | Path,
    gen_meta: dict[str, Any] | None = None,
) -> None:
    """Write graphs as JSONL, one record per line, optionally after a ``gen_meta`` header.

    Floats are written with shortest round-trip precision, so loading reproduces every
    field exactly.
    """
    lines = []
    if gen_meta is not None:
        lines.append(DatasetHeader(gen_meta=gen_meta).model_dump_json())
    lines.extend(graph_to_record(item).model_dump_json(exclude_none=True) for item in graphs)
    write_atomic(path, lines)
    logger.debug(f"Saved {len(graphs)} graphs to {path}")
