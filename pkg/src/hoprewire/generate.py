"""
Seeded synthetic graph families.

Every generator is a pure function of its parameters and a numpy ``Generator``. Datasets
split their seed into one independent PCG64 stream per graph index, so graph k does not
depend on how many graphs come before it.
"""

# Standard imports
from dataclasses import replace
from typing import Any, Literal

# Third party imports
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Internal imports
from src.hoprewire.errors import GenerationError
from src.hoprewire.graph import AttributedGraph

RNG_ALGORITHM = "numpy.PCG64/SeedSequence.spawn"
MAX_COLLISION_RETRIES = 100

Family = Literal["erdos", "neighborsmatch", "sbm", "path", "complete"]
Seed = int | np.random.Generator


class GeneratorSpec(BaseModel):
    """Parameters of a synthetic dataset.

    Attributes:
        family: Graph family
        count: Number of graphs
        seed: Root seed
        n: Node count (erdos, path, complete)
        p: Edge probability (erdos)
        depth: Tree depth r_p (neighborsmatch)
        block_sizes: Block sizes (sbm)
        p_in: Intra-block edge probability (sbm)
        p_out: Inter-block edge probability (sbm)
    """

    model_config = ConfigDict(extra="forbid")

    family: Family
    count: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    n: int | None = Field(default=None, ge=1)
    p: float | None = Field(default=None, ge=0.0, le=1.0)
    depth: int | None = Field(default=None, ge=1)
    block_sizes: list[int] | None = None
    p_in: float | None = Field(default=None, ge=0.0, le=1.0)
    p_out: float | None = Field(default=None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_family_parameters(self) -> "GeneratorSpec":
        required = {
            "erdos": ("n", "p"),
            "neighborsmatch": ("depth",),
            "sbm": ("block_sizes", "p_in", "p_out"),
            "path": ("n",),
            "complete": ("n",),
        }[self.family]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"family '{self.family}' needs {', '.join(missing)}")
        if self.block_sizes is not None and (
            not self.block_sizes or min(self.block_sizes) < 1
        ):
            raise ValueError("block_sizes must be a non-empty list of positive sizes")
        if self.family == "erdos" and self.count < 2:
            raise ValueError("an erdos retrieval dataset needs at least 2 graphs")
        return self


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent per-index generators derived from one root seed."""
    return [
        np.random.Generator(np.random.PCG64(child))
        for child in np.random.SeedSequence(seed).spawn(count)
    ]


def _check_probability(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise GenerationError(f"{name} must be in [0, 1], got {value}")


def _bidirectional(pairs: np.ndarray) -> np.ndarray:
    """Interleave (i, j) and (j, i) for every unordered pair."""
    edges = np.empty((2 * pairs.shape[0], 2), dtype=np.int64)
    edges[0::2] = pairs
    edges[1::2] = pairs[:, ::-1]
    return edges


def _sample_pairs(
    n: int, probabilities: np.ndarray | float, rng: np.random.Generator
) -> np.ndarray:
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(rows.shape[0]) < probabilities
    return np.stack([rows[keep], cols[keep]], axis=1).astype(np.int64)


def gen_erdos(n: int, p: float, seed: Seed) -> AttributedGraph:
    """G(n, p) with both directions per sampled pair and a constant node feature 1.0."""
    if n < 1:
        raise GenerationError(f"n must be >= 1, got {n}")
    _check_probability(p, "p")
    edges = _bidirectional(_sample_pairs(n, p, _rng(seed)))
    return AttributedGraph(num_nodes=n, edges=edges, node_features=np.ones((n, 1)))


def gen_erdos_retrieval_dataset(
    num_graphs: int, n: int, p: float, seed: int
) -> list[AttributedGraph]:
    """Pairwise distinct G(n, p) graphs where graph k carries graph_label k.

    A graph whose edge set repeats an earlier one is redrawn from its own stream, at most
    ``MAX_COLLISION_RETRIES`` times.

    Raises:
        GenerationError: If the retry cap is exceeded
    """
    if num_graphs < 2:
        raise GenerationError(f"a retrieval dataset needs at least 2 graphs, got {num_graphs}")
    seen: set[bytes] = set()
    graphs = []
    for label, rng in enumerate(spawn_rngs(seed, num_graphs)):
        for _ in range(MAX_COLLISION_RETRIES + 1):
            graph = gen_erdos(n, p, rng)
            key = graph.edges.tobytes()
            if key not in seen:
                break
        else:
            raise GenerationError(
                f"graph {label} collided {MAX_COLLISION_RETRIES} times with earlier graphs; "
                f"p={p} is too extreme for n={n}"
            )
        seen.add(key)
        graphs.append(replace(graph, graph_label=label))
    logger.debug(f"Generated {num_graphs} distinct Erdos graphs (n={n}, p={p})")
    return graphs


def neighborsmatch_feature_layout(depth: int) -> dict[str, slice]:
    """Column slices of the NeighborsMatch node features."""
    leaves = 2**depth
    return {
        "count": slice(0, leaves),
        "role": slice(leaves, leaves + 3),
        "class": slice(leaves + 3, 2 * leaves + 3),
    }


ROLE_ROOT, ROLE_LEAF, ROLE_INTERNAL = 0, 1, 2


def gen_neighborsmatch(depth: int, seed: Seed) -> AttributedGraph:
    """Complete binary tree whose root must fetch the class of the leaf matching its query.

    Nodes use heap order (root 0, children 2i + 1 and 2i + 2). Leaves hold a marker count and
    a class id, both random permutations of 0..2^depth - 1; the root holds a query equal to
    one leaf's marker count and the graph label is that leaf's class.

    Args:
        depth: Tree depth r_p (>= 1)
        seed: Seed or generator

    Returns:
        Tree with node features one-hot(count) ⊕ one-hot(role) ⊕ one-hot(class)
    """
    if depth < 1:
        raise GenerationError(f"depth must be >= 1, got {depth}")
    rng = _rng(seed)
    num_nodes = 2 ** (depth + 1) - 1
    num_leaves = 2**depth
    first_leaf = num_leaves - 1

    children = np.arange(1, num_nodes, dtype=np.int64)
    edges = _bidirectional(np.stack([(children - 1) // 2, children], axis=1))

    counts = rng.permutation(num_leaves)
    classes = rng.permutation(num_leaves)
    target = int(rng.integers(num_leaves))

    layout = neighborsmatch_feature_layout(depth)
    features = np.zeros((num_nodes, 2 * num_leaves + 3))
    role = layout["role"].start
    features[0, counts[target]] = 1.0
    features[0, role + ROLE_ROOT] = 1.0
    features[1:first_leaf, role + ROLE_INTERNAL] = 1.0
    leaves = np.arange(first_leaf, num_nodes)
    features[leaves, counts] = 1.0
    features[leaves, role + ROLE_LEAF] = 1.0
    features[leaves, layout["class"].start + classes] = 1.0
    return AttributedGraph(
        num_nodes=num_nodes,
        edges=edges,
        node_features=features,
        graph_label=int(classes[target]),
    )


def gen_sbm(block_sizes: list[int], p_in: float, p_out: float, seed: Seed) -> AttributedGraph:
    """Stochastic block model with node_labels = block ids.

    Node features have ``len(block_sizes) + 1`` columns: one random node per block reveals
    its block id, every other node sets the last ("unknown") column.
    """
    _check_probability(p_in, "p_in")
    _check_probability(p_out, "p_out")
    if not block_sizes or min(block_sizes) < 1:
        raise GenerationError(f"block sizes must be positive, got {block_sizes}")
    rng = _rng(seed)
    num_blocks = len(block_sizes)
    blocks = np.repeat(np.arange(num_blocks, dtype=np.int64), block_sizes)
    n = blocks.shape[0]

    rows, cols = np.triu_indices(n, k=1)
    probabilities = np.where(blocks[rows] == blocks[cols], p_in, p_out)
    edges = _bidirectional(_sample_pairs(n, probabilities, rng))

    features = np.zeros((n, num_blocks + 1))
    features[:, num_blocks] = 1.0
    starts = np.concatenate([[0], np.cumsum(block_sizes)[:-1]])
    revealed = starts + np.array([rng.integers(size) for size in block_sizes], dtype=np.int64)
    features[revealed, num_blocks] = 0.0
    features[revealed, blocks[revealed]] = 1.0
    return AttributedGraph(num_nodes=n, edges=edges, node_features=features, node_labels=blocks)


def gen_path(n: int) -> AttributedGraph:
    """Path 0-1-...-(n-1) with both directions and a constant node feature."""
    if n < 1:
        raise GenerationError(f"n must be >= 1, got {n}")
    pairs = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1).astype(np.int64)
    return AttributedGraph(num_nodes=n, edges=_bidirectional(pairs), node_features=np.ones((n, 1)))


def gen_complete(n: int) -> AttributedGraph:
    """Complete graph on n nodes, n(n - 1) directed edges."""
    if n < 1:
        raise GenerationError(f"n must be >= 1, got {n}")
    pairs = np.stack(np.triu_indices(n, k=1), axis=1).astype(np.int64)
    return AttributedGraph(num_nodes=n, edges=_bidirectional(pairs), node_features=np.ones((n, 1)))


def generate_dataset(spec: GeneratorSpec) -> list[AttributedGraph]:
    """Generate ``spec.count`` graphs of ``spec.family``."""
    logger.info(f"Generating {spec.count} '{spec.family}' graphs with seed {spec.seed}")
    if spec.family == "erdos":
        return gen_erdos_retrieval_dataset(
            spec.count, spec.n, spec.p, spec.seed  # type: ignore[arg-type]
        )
    if spec.family == "path":
        return [gen_path(spec.n) for _ in range(spec.count)]  # type: ignore[arg-type]
    if spec.family == "complete":
        return [gen_complete(spec.n) for _ in range(spec.count)]  # type: ignore[arg-type]
    rngs = spawn_rngs(spec.seed, spec.count)
    if spec.family == "neighborsmatch":
        return [gen_neighborsmatch(spec.depth, rng) for rng in rngs]  # type: ignore[arg-type]
    return [
        gen_sbm(spec.block_sizes, spec.p_in, spec.p_out, rng)  # type: ignore[arg-type]
        for rng in rngs
    ]


def gen_meta(spec: GeneratorSpec) -> dict[str, Any]:
    """Dataset header recording the full ``GeneratorSpec`` and the RNG algorithm."""
    return {**spec.model_dump(exclude_none=True), "rng": RNG_ALGORITHM}
