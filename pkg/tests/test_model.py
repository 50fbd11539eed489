# Standard imports
import math

# Third party imports
import numpy as np
import pytest
from pydantic import ValidationError

# Internal imports
from src.hoprewire.encode import encode, flip_spectral_signs
from src.hoprewire.errors import (
    ConfigError,
    GraphValidationError,
    NonFiniteError,
    PositionalEncodingError,
)
from src.hoprewire.generate import gen_sbm, spawn_rngs
from src.hoprewire.graph import AttributedGraph
from src.hoprewire.rewire import add_cls_node, as_rewired, expand_receptive_field
from src.hoprewire.toy_gnn.autograd import Tensor
from src.hoprewire.toy_gnn.batching import collate
from src.hoprewire.toy_gnn.model import (
    ModelConfig,
    ToyModel,
    cross_entropy,
    infer_model_config,
)
from tests.helpers import erdos_graphs, undirected


def encoded(kind: str, count: int = 3, seed: int = 0, cls: bool = True):
    graphs = []
    for g in erdos_graphs(count, seed, max_n=8):
        rw = expand_receptive_field(g, 2)
        rw = add_cls_node(rw) if cls else rw
        graphs.append(rw if kind == "none" else encode(rw, kind, q=3))
    return graphs


def small_model(graphs, **overrides) -> ToyModel:
    fields = {"hidden_dim": 8, "heads": 2, "layers": 2, **overrides}
    return ToyModel(infer_model_config(graphs, **fields))


def permuted(g: AttributedGraph, perm: np.ndarray) -> AttributedGraph:
    """Relabel node i as perm[i]."""
    inverse = np.argsort(perm)
    return AttributedGraph(
        num_nodes=g.num_nodes,
        edges=perm[g.edges],
        node_features=g.node_features[inverse],
        edge_features=g.edge_features,
        node_labels=None if g.node_labels is None else g.node_labels[inverse],
        graph_label=g.graph_label,
    )


@pytest.mark.parametrize(
    "fields",
    [
        {"hidden_dim": 10, "heads": 4},
        {"pe_kind": "adj", "pe_dim": 0},
        {"readout": "per-node"},
        {"task": "regression", "out_dim": 3},
    ],
)
def test_invalid_model_configs(fields):
    with pytest.raises(ValidationError):
        ModelConfig(**fields)


def test_infer_model_config():
    config = infer_model_config(encoded("adj"), hidden_dim=8, heads=2)
    assert (config.node_dim, config.edge_dim) == (2, 1)
    assert (config.pe_kind, config.pe_dim) == ("adj", 2)
    graphs = encoded("short")
    largest = max(int(g.encoding.values.max()) for g in graphs)
    assert infer_model_config(graphs).pe_dim == max(largest, 1)
    assert infer_model_config(encoded("lp")).pe_dim == 3
    assert infer_model_config(encoded("lp"), pe_kind="none").pe_kind == "none"


def test_initialization_is_seeded():
    graphs = encoded("short")
    first, second = small_model(graphs).state_dict(), small_model(graphs).state_dict()
    other = small_model(graphs, seed=1).state_dict()
    assert all(np.array_equal(first[name], second[name]) for name in first)
    assert not np.array_equal(first["layer0.A"], other["layer0.A"])


@pytest.mark.parametrize("placement", ["pre", "post"])
def test_attention_rows_sum_to_one(placement):
    graphs = encoded("adj")
    model = small_model(graphs, norm_placement=placement)
    batch = collate(graphs)
    result = model.forward(batch)
    assert len(result.attention) == 2
    for weights in result.attention:
        totals = np.zeros((batch.num_nodes, 2))
        np.add.at(totals, batch.dst, weights)
        np.testing.assert_allclose(totals, 1.0, atol=1e-12)


def test_isolated_node_attends_to_itself():
    g = as_rewired(AttributedGraph(num_nodes=1, edges=[], node_features=[[1.0]], graph_label=0))
    model = ToyModel(ModelConfig(hidden_dim=4, heads=2, layers=1, node_dim=1, out_dim=2))
    (weights,) = model.forward([g]).attention
    np.testing.assert_allclose(weights, np.ones((1, 2)))


def test_node_outputs_are_permutation_equivariant():
    rng = spawn_rngs(3, 1)[0]
    g = gen_sbm([4, 3], 0.7, 0.2, rng)
    perm = rng.permutation(g.num_nodes)
    original = encode(expand_receptive_field(g, 2), "short")
    shuffled = encode(expand_receptive_field(permuted(g, perm), 2), "short")
    model = small_model(
        [original, shuffled], readout="per-node", task="per-node-multiclass"
    )
    out = model.forward([original]).output.data
    out_shuffled = model.forward([shuffled]).output.data
    np.testing.assert_allclose(out_shuffled[perm], out, atol=1e-10)


@pytest.mark.parametrize("readout", ["mean-pool", "sum-pool", "cls-feature"])
def test_graph_outputs_are_permutation_invariant(readout):
    g = erdos_graphs(1, seed=6, max_n=8)[0]
    perm = np.random.default_rng(0).permutation(g.num_nodes)
    graphs = [
        encode(add_cls_node(expand_receptive_field(item, 2)), "short")
        for item in (g, permuted(g, perm))
    ]
    model = small_model(graphs, readout=readout)
    outputs = [model.forward([item]).output.data for item in graphs]
    np.testing.assert_allclose(outputs[0], outputs[1], atol=1e-10)


def test_zero_weights_pass_the_embedding_through():
    graphs = encoded("none")
    model = small_model(graphs)
    for name, p in model.params.items():
        if name.startswith("layer") and not name.split(".")[1].startswith("norm"):
            p.data = np.zeros_like(p.data)
    batch = collate(graphs)
    expected = batch.node_features @ model.params["input.node.weight"].data
    expected = expected + model.params["input.node.bias"].data
    np.testing.assert_allclose(model.forward(batch).node_states.data, expected, atol=1e-12)


def test_cross_entropy_values():
    uniform = Tensor(np.zeros((2, 4)))
    assert float(cross_entropy(uniform, np.array([0, 3])).data) == pytest.approx(math.log(4))
    confident = Tensor(np.array([[50.0, 0.0], [0.0, 50.0]]))
    assert float(cross_entropy(confident, np.array([0, 1])).data) < 1e-12
    with pytest.raises(ValueError, match="target outside"):
        cross_entropy(uniform, np.array([0, 4]))
    with pytest.raises(ValueError, match="shape mismatch"):
        cross_entropy(uniform, np.array([0]))


def _loss(model: ToyModel, batch) -> float:
    return float(model.loss(model.forward(batch).output, batch).data)


def fixed_instance(kind: str):
    """Six nodes, two triangles joined by a bridge, expanded to r = 2 with a CLS node."""
    g = undirected(
        6,
        [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)],
        node_features=np.linspace(-1.0, 1.0, 12).reshape(6, 2),
        edge_features=np.linspace(0.5, -0.8, 14).reshape(14, 1),
        graph_label=2,
    )
    rw = add_cls_node(expand_receptive_field(g, 2))
    return [rw if kind == "none" else encode(rw, kind, q=3)]


def _central_difference(model: ToyModel, batch, p: Tensor, index: int, eps: float) -> float:
    original = p.data
    shifted = original.copy().reshape(-1)
    shifted[index] += eps
    p.data = shifted.reshape(original.shape)
    upper = _loss(model, batch)
    shifted[index] -= 2 * eps
    p.data = shifted.reshape(original.shape)
    lower = _loss(model, batch)
    p.data = original
    return (upper - lower) / (2 * eps)


@pytest.mark.parametrize("placement", ["pre", "post"])
@pytest.mark.parametrize("kind", ["none", "short", "adj", "lp"])
def test_gradients_match_finite_differences(kind, placement):
    graphs = fixed_instance(kind)
    model = small_model(graphs, norm_placement=placement, readout="cls-feature")
    batch = collate(graphs, pe_kind=model.config.pe_kind)
    _, grads = model.backward(batch)

    checked = 0
    # entries whose step straddles a ReLU kink get one retry with a smaller step
    retried = []
    for name, p in model.params.items():
        analytic = grads[name].reshape(-1)
        for index in range(analytic.size):
            expected = pytest.approx(analytic[index], rel=1e-3, abs=1e-6)
            checked += 1
            if _central_difference(model, batch, p, index, 1e-4) == expected:
                continue
            retried.append((name, index))
            assert _central_difference(model, batch, p, index, 1e-6) == expected, (name, index)
    assert checked == model.num_parameters()
    assert len(retried) <= checked // 100, retried


def test_last_edge_update_does_not_reach_the_loss():
    graphs = encoded("short")
    model = small_model(graphs)
    _, grads = model.backward(graphs)
    for name in ("layer1.ffn_e.0.weight", "layer1.ffn_e.0.bias", "layer1.ffn_e.1.bias"):
        assert not grads[name].any()
    assert grads["layer0.ffn_e.0.weight"].any()


def test_regression_optimum_has_zero_gradient():
    g = as_rewired(
        AttributedGraph(
            num_nodes=2,
            edges=[(0, 1), (1, 0)],
            node_features=[[1.0], [2.0]],
            graph_label=0.25,
        )
    )
    model = ToyModel(ModelConfig(hidden_dim=4, heads=2, layers=1, node_dim=1, task="regression"))
    model.params["readout.1.weight"].data = np.zeros((4, 1))
    model.params["readout.1.bias"].data = np.array([0.25])
    loss, grads = model.backward([g])
    assert loss == 0.0
    assert all(not grad.any() for grad in grads.values())
    assert math.isnan(model.accuracy(model.forward([g]).output, collate([g])))


def test_non_finite_activations_are_reported():
    graphs = encoded("none")
    model = small_model(graphs)
    model.params["input.node.bias"].data = np.full(8, np.nan)
    with pytest.raises(NonFiniteError, match="layer 0"):
        model.forward(graphs)


def test_encoding_mismatch():
    model = small_model(encoded("short"))
    with pytest.raises(PositionalEncodingError):
        model.forward(encoded("adj"))
    wide = small_model(encoded("adj"), pe_dim=5)
    with pytest.raises(PositionalEncodingError, match="width"):
        wide.forward(encoded("adj"))


def test_feature_size_mismatch():
    model = small_model(encoded("none"), node_dim=3)
    with pytest.raises(GraphValidationError, match="d_v=3"):
        model.forward(encoded("none"))


def test_cls_readout_needs_cls_node():
    graphs = encoded("none", cls=False)
    model = small_model(graphs, readout="cls-feature")
    with pytest.raises(ConfigError):
        model.forward(graphs)


def test_zeroed_spectral_input_ignores_sign_flips():
    graphs = encoded("lp")
    model = small_model(graphs)
    model.params["input.node_pe.weight"].data = np.zeros_like(
        model.params["input.node_pe.weight"].data
    )
    flipped = [flip_spectral_signs(g, seed) for seed, g in enumerate(graphs)]
    np.testing.assert_array_equal(
        model.forward(graphs).output.data, model.forward(flipped).output.data
    )
