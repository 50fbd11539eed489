"""
Toy graph Transformer with edge features.

Per layer (pre-normalization placement), for node i, head k and edge (j -> i):

    ĥ = Norm(h),  ê = Norm(e)
    â_ijk = ((A_k ĥ_i)ᵀ (B_k ĥ_j) + C_k ê_ij) / d,  softmax over j ∈ N_i ∪ {i}
    ĥĥ_i = ||_k Σ_j a_ijk W_k ĥ_j + h_i
    h_i  = FFN(Norm(ĥĥ_i)) + ĥĥ_i
    e_ij = FFN(ê_ij) + e_ij

The post placement normalizes after each residual sum instead. The input layer embeds node
and edge features plus the positional encoding and adds them; the readout applies an FFN
to pooled, CLS, root or per-node states.
"""

# Standard imports
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

# Third party imports
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Internal imports
from src.hoprewire.errors import (
    ConfigError,
    GraphValidationError,
    NonFiniteError,
    PositionalEncodingError,
)
from src.hoprewire.rewire import RewiredGraph
from src.hoprewire.toy_gnn import autograd as ag
from src.hoprewire.toy_gnn.autograd import Tensor
from src.hoprewire.toy_gnn.batching import GraphBatch, batch_pe_kind, collate

Readout = Literal["mean-pool", "sum-pool", "cls-feature", "per-node", "root"]
Task = Literal["multiclass", "per-node-multiclass", "regression"]
NORM_EPS = 1e-5


class ModelConfig(BaseModel):
    """Architecture of a ToyModel.

    Attributes:
        hidden_dim: Width d of node and edge states
        heads: Attention heads H (must divide d)
        layers: Number of Transformer layers L
        readout: How graph or node outputs are read from the last layer
        norm_placement: ``"pre"`` (before attention) or ``"post"`` (after each residual)
        seed: Parameter initialization seed
        pe_kind: Positional encoding the model consumes (``"none"`` ignores encodings)
        pe_dim: q for ``"lp"``, vector length r for ``"adj"``, largest value for ``"short"``
        node_dim: Input node feature size d_v
        edge_dim: Input edge feature size d_e
        out_dim: Number of classes, or 1 for regression
        task: Loss / target type
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    hidden_dim: int = Field(default=32, ge=1)
    heads: int = Field(default=4, ge=1)
    layers: int = Field(default=4, ge=1)
    readout: Readout = "mean-pool"
    norm_placement: Literal["pre", "post"] = "pre"
    seed: int = Field(default=0, ge=0)
    pe_kind: Literal["short", "adj", "lp", "none"] = "none"
    pe_dim: int = Field(default=0, ge=0)
    node_dim: int = Field(default=0, ge=0)
    edge_dim: int = Field(default=0, ge=0)
    out_dim: int = Field(default=1, ge=1)
    task: Task = "multiclass"

    @model_validator(mode="after")
    def _check_consistency(self) -> "ModelConfig":
        if self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by {self.heads} heads")
        if self.pe_kind != "none" and self.pe_dim < 1:
            raise ValueError(f"pe_kind '{self.pe_kind}' needs pe_dim >= 1")
        if (self.readout == "per-node") != (self.task == "per-node-multiclass"):
            raise ValueError("the per-node readout goes with the per-node-multiclass task")
        if self.task == "regression" and self.out_dim != 1:
            raise ValueError("regression needs out_dim = 1")
        return self


def infer_model_config(graphs: Sequence[RewiredGraph], **overrides: object) -> ModelConfig:
    """ModelConfig whose input sizes, encoding and class count match a dataset.

    Explicit ``overrides`` win over inferred values.
    """
    overrides = {key: value for key, value in overrides.items() if value is not None}
    first = graphs[0]
    pe_kind = str(overrides.get("pe_kind") or batch_pe_kind(graphs))
    pe_dim = 0
    if pe_kind in ("adj", "lp"):
        pe_dim = int(first.encoding.values.shape[1])  # type: ignore[union-attr]
    elif pe_kind == "short":
        encodings = [g.encoding.values for g in graphs]  # type: ignore[union-attr]
        largest = [int(values.max(initial=0)) for values in encodings]
        pe_dim = max(*largest, 1)

    task = overrides.get("task", "multiclass")
    if task == "regression":
        out_dim = 1
    elif task == "per-node-multiclass":
        node_labels = [g.graph.node_labels for g in graphs]
        labels = [int(values.max(initial=0)) for values in node_labels]  # type: ignore[union-attr]
        out_dim = 1 + max(labels)
    else:
        out_dim = 1 + max(int(g.graph.graph_label) for g in graphs)  # type: ignore[arg-type]
    fields: dict[str, object] = {
        "pe_kind": pe_kind,
        "pe_dim": pe_dim,
        "node_dim": first.graph.node_dim,
        "edge_dim": first.graph.edge_dim,
        "out_dim": out_dim,
        "task": task,
    }
    fields.update(overrides)
    return ModelConfig(**fields)  # type: ignore[arg-type]


@dataclass
class ForwardResult:
    """Outputs of one forward pass.

    Attributes:
        node_states: (N, d) final node states
        output: (B, out_dim) graph outputs or (N, out_dim) node outputs
        attention: Per layer, the (M + N, H) attention weights
    """

    node_states: Tensor
    output: Tensor
    attention: list[np.ndarray] = field(default_factory=list)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / max(fan_in + fan_out, 1))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    """Normalize each row to zero mean and unit variance, then scale and shift."""
    centered = x - ag.mean(x, axis=-1, keepdims=True)
    variance = ag.mean(centered * centered, axis=-1, keepdims=True)
    return centered * ag.power(variance + NORM_EPS, -0.5) * gamma + beta


def grouped_softmax(logits: Tensor, groups: np.ndarray, num_groups: int) -> Tensor:
    """Softmax of the rows of ``logits`` within each group (per column)."""
    shift = ag.take(ag.segment_max(logits, groups, num_groups), groups)
    weights = ag.exp(logits - shift)
    totals = ag.segment_sum(weights, groups, num_groups)
    return weights / ag.take(totals, groups)


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` over the rows selected by ``mask``."""
    rows, classes = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    mask = np.ones(rows, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if targets.shape != (rows,):
        raise ValueError(f"shape mismatch: {rows} outputs for {targets.shape[0]} targets")
    if np.any(mask & ((targets < 0) | (targets >= classes))):
        raise ValueError(f"target outside 0..{classes - 1}")
    one_hot = np.zeros((rows, classes))
    selected = np.flatnonzero(mask)
    one_hot[selected, targets[selected]] = 1.0

    shifted = logits - Tensor(logits.data.max(axis=1, keepdims=True))
    log_probs = shifted - ag.log(ag.tsum(ag.exp(shifted), axis=1, keepdims=True))
    return -ag.tsum(log_probs * one_hot) / float(max(selected.size, 1))


class ToyModel:
    """Parameters and forward/backward passes of the toy graph Transformer."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._init_parameters(np.random.Generator(np.random.PCG64(config.seed)))
        logger.debug(
            f"Built ToyModel with {self.num_parameters()} parameters "
            f"(d={config.hidden_dim}, H={config.heads}, L={config.layers}, pe={config.pe_kind})"
        )

    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    def _add_linear(self, name: str, rng: np.random.Generator, fan_in: int, fan_out: int) -> None:
        self._add(f"{name}.weight", _xavier(rng, fan_in, fan_out))
        self._add(f"{name}.bias", np.zeros(fan_out))

    def _add_ffn(self, name: str, rng: np.random.Generator, d_in: int, d_out: int) -> None:
        self._add_linear(f"{name}.0", rng, d_in, 2 * d_in)
        self._add_linear(f"{name}.1", rng, 2 * d_in, d_out)

    def _add_norm(self, name: str, d: int) -> None:
        self._add(f"{name}.gamma", np.ones(d))
        self._add(f"{name}.beta", np.zeros(d))

    def _init_parameters(self, rng: np.random.Generator) -> None:
        c = self.config
        d = c.hidden_dim
        self._add_linear("input.node", rng, c.node_dim, d)
        self._add_linear("input.edge", rng, c.edge_dim, d)
        self._add("input.self_edge", _xavier(rng, 1, d)[0])
        if c.pe_kind == "lp":
            self._add_linear("input.node_pe", rng, c.pe_dim, d)
        elif c.pe_kind == "adj":
            self._add_linear("input.edge_pe", rng, c.pe_dim, d)
        elif c.pe_kind == "short":
            self._add("input.edge_pe.table", _xavier(rng, c.pe_dim + 1, d))

        for layer in range(c.layers):
            prefix = f"layer{layer}"
            for matrix in ("A", "B", "W"):
                self._add(f"{prefix}.{matrix}", _xavier(rng, d, d))
            self._add(f"{prefix}.C", _xavier(rng, d, c.heads))
            self._add_norm(f"{prefix}.norm_h", d)
            self._add_norm(f"{prefix}.norm_hh", d)
            self._add_norm(f"{prefix}.norm_e", d)
            self._add_ffn(f"{prefix}.ffn_h", rng, d, d)
            self._add_ffn(f"{prefix}.ffn_e", rng, d, d)

        self._add_linear("readout.0", rng, d, d)
        self._add_linear("readout.1", rng, d, c.out_dim)

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            self.params[name].data = np.array(value, dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def _linear(self, name: str, x: Tensor | np.ndarray) -> Tensor:
        return ag.matmul(x, self.params[f"{name}.weight"]) + self.params[f"{name}.bias"]

    def _ffn(self, name: str, x: Tensor) -> Tensor:
        return self._linear(f"{name}.1", ag.relu(self._linear(f"{name}.0", x)))

    def _norm(self, name: str, x: Tensor) -> Tensor:
        return layer_norm(x, self.params[f"{name}.gamma"], self.params[f"{name}.beta"])

    def _check_batch(self, batch: GraphBatch) -> None:
        c = self.config
        node_dim, edge_dim = batch.node_features.shape[1], batch.edge_features.shape[1]
        if (node_dim, edge_dim) != (c.node_dim, c.edge_dim):
            raise GraphValidationError(
                f"model expects d_v={c.node_dim}, d_e={c.edge_dim}, "
                f"got d_v={node_dim}, d_e={edge_dim}"
            )
        if c.pe_kind != batch.pe_kind:
            raise PositionalEncodingError(
                f"model expects '{c.pe_kind}' encodings, batch carries '{batch.pe_kind}'"
            )
        if c.pe_kind in ("adj", "lp"):
            values = batch.edge_pe if c.pe_kind == "adj" else batch.node_pe
            width = values.shape[1]  # type: ignore[union-attr]
            if width != c.pe_dim:
                raise PositionalEncodingError(
                    f"'{c.pe_kind}' encoding width {width} != {c.pe_dim}"
                )
        if c.pe_kind == "short":
            largest = int(batch.edge_pe.max(initial=0))  # type: ignore[union-attr]
            if largest > c.pe_dim:
                raise PositionalEncodingError(
                    f"shortest-path value {largest} exceeds the lookup size {c.pe_dim}"
                )

    def _input_layer(self, batch: GraphBatch) -> tuple[Tensor, Tensor]:
        c = self.config
        h = self._linear("input.node", batch.node_features)
        if c.pe_kind == "lp":
            h = h + self._linear("input.node_pe", batch.node_pe)  # type: ignore[arg-type]

        e = self._linear("input.edge", batch.edge_features)
        if c.pe_kind == "adj":
            counts = batch.edge_pe.astype(np.float64)  # type: ignore[union-attr]
            e = e + self._linear("input.edge_pe", counts)
        elif c.pe_kind == "short":
            distances = batch.edge_pe[:, 0]  # type: ignore[index]
            e = e + ag.take(self.params["input.edge_pe.table"], distances)
        self_edges = ag.take(
            ag.reshape(self.params["input.self_edge"], (1, c.hidden_dim)),
            np.zeros(batch.num_nodes, dtype=np.int64),
        )
        return h, ag.concat([e, self_edges], axis=0)

    def _attention(
        self, prefix: str, h: Tensor, e: Tensor, batch: GraphBatch
    ) -> tuple[Tensor, np.ndarray]:
        c = self.config
        heads, head_dim = c.heads, c.hidden_dim // c.heads
        num_messages = batch.src.shape[0]
        p = self.params
        split = (num_messages, heads, head_dim)

        def project(matrix: str, index: np.ndarray) -> Tensor:
            return ag.reshape(ag.take(ag.matmul(h, p[f"{prefix}.{matrix}"]), index), split)

        queries, keys = project("A", batch.dst), project("B", batch.src)
        scores = ag.tsum(queries * keys, axis=-1) + ag.matmul(e, p[f"{prefix}.C"])
        logits = scores / float(c.hidden_dim)
        weights = grouped_softmax(logits, batch.dst, batch.num_nodes)

        messages = project("W", batch.src) * ag.reshape(weights, (num_messages, heads, 1))
        pooled = ag.segment_sum(messages, batch.dst, batch.num_nodes)
        return ag.reshape(pooled, (batch.num_nodes, c.hidden_dim)), weights.data

    def _layer(
        self, index: int, h: Tensor, e: Tensor, batch: GraphBatch
    ) -> tuple[Tensor, Tensor, np.ndarray]:
        prefix = f"layer{index}"
        if self.config.norm_placement == "pre":
            h_norm = self._norm(f"{prefix}.norm_h", h)
            e_norm = self._norm(f"{prefix}.norm_e", e)
            attended, weights = self._attention(prefix, h_norm, e_norm, batch)
            hh = attended + h
            h = self._ffn(f"{prefix}.ffn_h", self._norm(f"{prefix}.norm_hh", hh)) + hh
            e = self._ffn(f"{prefix}.ffn_e", e_norm) + e
        else:
            attended, weights = self._attention(prefix, h, e, batch)
            hh = self._norm(f"{prefix}.norm_h", attended + h)
            h = self._norm(f"{prefix}.norm_hh", self._ffn(f"{prefix}.ffn_h", hh) + hh)
            e = self._norm(f"{prefix}.norm_e", self._ffn(f"{prefix}.ffn_e", e) + e)
        return h, e, weights

    def _readout(self, h: Tensor, batch: GraphBatch) -> Tensor:
        readout = self.config.readout
        if readout == "per-node":
            pooled = h
        elif readout in ("mean-pool", "sum-pool"):
            pooled = ag.segment_sum(h, batch.node_graph, batch.num_graphs)
            if readout == "mean-pool":
                pooled = pooled / batch.graph_sizes.reshape(-1, 1).astype(np.float64)
        elif readout == "cls-feature":
            if batch.cls_index is None:
                raise ConfigError("cls-feature readout needs a CLS node in every graph")
            pooled = ag.take(h, batch.cls_index)
        else:
            pooled = ag.take(h, batch.root_index)
        return self._ffn("readout", pooled)

    def as_batch(self, graphs: GraphBatch | Sequence[RewiredGraph]) -> GraphBatch:
        if isinstance(graphs, GraphBatch):
            return graphs
        return collate(graphs, pe_kind=self.config.pe_kind)

    def forward(self, graphs: GraphBatch | Sequence[RewiredGraph]) -> ForwardResult:
        """Run the input layer, L Transformer layers and the readout.

        Raises:
            PositionalEncodingError: If the graphs do not carry the configured encoding
            NonFiniteError: If activations of some layer are not finite
        """
        batch = self.as_batch(graphs)
        self._check_batch(batch)
        h, e = self._input_layer(batch)
        attention = []
        for index in range(self.config.layers):
            h, e, weights = self._layer(index, h, e, batch)
            if not (np.all(np.isfinite(h.data)) and np.all(np.isfinite(e.data))):
                raise NonFiniteError(f"non-finite activations in layer {index}")
            attention.append(weights)
        return ForwardResult(node_states=h, output=self._readout(h, batch), attention=attention)

    def loss(self, output: Tensor, batch: GraphBatch) -> Tensor:
        """Cross-entropy for classification, mean absolute error for regression."""
        task = self.config.task
        if task == "per-node-multiclass":
            if batch.node_labels is None:
                raise ValueError("per-node task needs node labels")
            return cross_entropy(output, batch.node_labels, mask=batch.node_labels >= 0)
        if batch.graph_labels is None:
            raise ValueError(f"task '{task}' needs graph labels")
        if task == "multiclass":
            return cross_entropy(output, batch.graph_labels.astype(np.int64))
        targets = batch.graph_labels.astype(np.float64).reshape(-1, 1)
        if output.shape != targets.shape:
            raise ValueError(f"shape mismatch: output {output.shape} vs targets {targets.shape}")
        return ag.mean(ag.tabs(output - targets))

    def backward(
        self, graphs: GraphBatch | Sequence[RewiredGraph]
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Loss value and its gradient for every parameter (zeros off the computation path).

        Raises:
            NonFiniteError: Naming the first parameter whose gradient is not finite
        """
        batch = self.as_batch(graphs)
        self.zero_grad()
        loss = self.loss(self.forward(batch).output, batch)
        loss.backward()
        grads = {}
        for name, p in self.params.items():
            grad = np.zeros_like(p.data) if p.grad is None else p.grad
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError(f"non-finite gradient for parameter '{name}'")
            grads[name] = grad
        return float(loss.data), grads

    def predict(self, output: Tensor) -> np.ndarray:
        if self.config.task == "regression":
            return output.data[:, 0]
        return output.data.argmax(axis=1)

    def accuracy(self, output: Tensor, batch: GraphBatch) -> float:
        """Fraction of correct predictions (labelled nodes only for per-node tasks)."""
        predictions = self.predict(output)
        if self.config.task == "per-node-multiclass":
            mask = batch.node_labels >= 0  # type: ignore[operator]
            if not mask.any():
                return 0.0
            labels = batch.node_labels[mask]  # type: ignore[index]
            return float(np.mean(predictions[mask] == labels))
        if self.config.task == "regression":
            return float("nan")
        return float(np.mean(predictions == batch.graph_labels))
