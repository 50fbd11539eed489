"""
Positional encodings of rewired graphs.

Edge encodings (shortest-path distance, adjacency-power walk counts) are local and lossless:
the original edges are exactly the 1-ring of the encoding. The spectral node encoding is
global and is not enough to recover the original graph.
"""

# Standard imports
from collections.abc import Sequence
from dataclasses import replace

# Third party imports
import numpy as np
from loguru import logger

# Internal imports
from config.settings import settings
from src.hoprewire.errors import PositionalEncodingError
from src.hoprewire.linalg import (
    adjacency_powers,
    all_pairs_hop_distances,
    normalized_laplacian,
    symmetric_eigendecomposition,
)
from src.hoprewire.rewire import (
    PositionalEncoding,
    Provenance,
    RewiredGraph,
    original_subgraph,
    with_encoding,
)


def _original_and_mask(rw: RewiredGraph, kind: str) -> tuple[np.ndarray, np.ndarray]:
    if rw.edge_provenance is None:
        raise PositionalEncodingError(
            f"'{kind}' encoding needs edge provenance; run rewire first"
        )
    return rw.edge_provenance, rw.edge_provenance != Provenance.CLS


def encode_shortest_path(rw: RewiredGraph) -> RewiredGraph:
    """Label each edge with the hop distance of its endpoints in the original graph.

    CLS edges get ``settings.cls_short_pe_value`` (0 by default).

    Args:
        rw: Rewired graph with provenance

    Returns:
        The rewired graph with a ``"short"`` encoding of width 1
    """
    provenance, non_cls = _original_and_mask(rw, "short")
    distances = all_pairs_hop_distances(original_subgraph(rw))
    values = np.full((rw.graph.num_edges, 1), settings.cls_short_pe_value, dtype=np.int64)
    u, v = rw.graph.edges[non_cls, 0], rw.graph.edges[non_cls, 1]
    values[non_cls, 0] = distances[u, v]
    if np.any(values[non_cls, 0] < 1):
        raise PositionalEncodingError("edge between nodes that are disconnected in the original")
    if np.any(values[provenance == Provenance.ORIGINAL, 0] != 1):
        raise PositionalEncodingError("original edge with hop distance other than 1")
    return with_encoding(rw, PositionalEncoding("short", values, {"r": rw.r}))


def encode_adjacency_powers(rw: RewiredGraph, powers: int | None = None) -> RewiredGraph:
    """Label each edge with its walk counts ((A^1)_uv, ..., (A^k)_uv) in the original graph.

    Args:
        rw: Rewired graph with provenance
        powers: Length k of the vector, defaults to the expansion radius ``rw.r``

    Returns:
        The rewired graph with an ``"adj"`` encoding; CLS edges get the zero vector

    Raises:
        WalkCountOverflowError: If a walk count does not fit into int64
    """
    _, non_cls = _original_and_mask(rw, "adj")
    k = rw.r if powers is None else powers
    walks = adjacency_powers(original_subgraph(rw), k)
    values = np.zeros((rw.graph.num_edges, k), dtype=np.int64)
    u, v = rw.graph.edges[non_cls, 0], rw.graph.edges[non_cls, 1]
    for index, matrix in enumerate(walks.powers):
        values[non_cls, index] = matrix[u, v]
    return with_encoding(rw, PositionalEncoding("adj", values, {"r": k}))


def encode_spectral(
    rw: RewiredGraph, q: int | None = None, sign_seed: int | None = None
) -> RewiredGraph:
    """Embed the nodes with the q smallest non-trivial eigenvectors of Δ(G).

    Missing coordinates (q > n - 1) are zero-padded and the padding is recorded in the
    encoding metadata. The CLS node gets the zero vector.

    Args:
        rw: Rewired graph with provenance
        q: Number of coordinates, defaults to ``settings.default_q``
        sign_seed: When given, flip each eigenvector's sign with probability 1/2

    Returns:
        The rewired graph with an ``"lp"`` encoding of shape (n, q)
    """
    q = settings.default_q if q is None else q
    if q < 1:
        raise PositionalEncodingError(f"q must be >= 1, got {q}")
    _original_and_mask(rw, "lp")
    original = original_subgraph(rw)
    decomposition = symmetric_eigendecomposition(normalized_laplacian(original))

    available = min(q, max(original.num_nodes - 1, 0))
    padded = q - available
    if padded:
        logger.warning(
            f"Spectral encoding: q={q} but only {available} non-trivial eigenvectors "
            f"for {original.num_nodes} nodes, padding {padded} columns with zeros"
        )
    values = np.zeros((rw.graph.num_nodes, q))
    values[: original.num_nodes, :available] = decomposition.eigenvectors[:, 1 : 1 + available]
    encoded = with_encoding(rw, PositionalEncoding("lp", values, {"q": q, "padded": padded}))
    if sign_seed is not None:
        encoded = flip_spectral_signs(encoded, sign_seed)
    return encoded


def flip_spectral_signs(rw: RewiredGraph, seed: int | np.random.Generator) -> RewiredGraph:
    """Flip the global sign of each spectral coordinate column with probability 1/2."""
    pe = rw.encoding
    if pe is None or pe.kind != "lp":
        raise PositionalEncodingError("sign flips need an 'lp' encoding")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=pe.values.shape[1])
    flipped = PositionalEncoding("lp", pe.values * signs, dict(pe.meta))
    return replace(rw, encoding=flipped)


def diffusion_weights_from_pe(rw: RewiredGraph, thetas: Sequence[float]) -> np.ndarray:
    """Per-edge diffusion weights θ_0·[u = v] + Σ_k θ_k·(p_e)_k from stored walk counts.

    Args:
        rw: Rewired graph with an ``"adj"`` encoding of width r
        thetas: r + 1 coefficients, normally a decaying sequence

    Returns:
        (m,) float64 weights, summed over k = 1..r in order
    """
    pe = rw.encoding
    if pe is None or pe.kind != "adj":
        raise PositionalEncodingError("diffusion weights need an 'adj' encoding")
    r = pe.values.shape[1]
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1)
    if thetas.shape[0] != r + 1:
        raise PositionalEncodingError(
            f"theta length mismatch: expected {r + 1} coefficients, got {thetas.shape[0]}"
        )
    if thetas.shape[0] > 1 and not np.all(np.diff(thetas) < 0):
        logger.warning(f"Diffusion coefficients are not strictly decreasing: {thetas.tolist()}")

    edges = rw.graph.edges
    weights = thetas[0] * (edges[:, 0] == edges[:, 1]).astype(np.float64)
    for k in range(1, r + 1):
        weights = weights + thetas[k] * pe.values[:, k - 1]
    return weights


def shortest_from_adjacency(pe: Sequence[int] | np.ndarray) -> int:
    """Shortest-path length encoded by a walk-count vector: first k with (p_e)_k > 0."""
    nonzero = np.flatnonzero(np.asarray(pe) > 0)
    if nonzero.size == 0:
        raise PositionalEncodingError("all-zero adjacency encoding has no shortest path")
    return int(nonzero[0]) + 1


def encode(
    rw: RewiredGraph,
    kind: str,
    q: int | None = None,
    sign_seed: int | None = None,
    powers: int | None = None,
) -> RewiredGraph:
    """Dispatch to the encoder for ``kind`` in {"short", "adj", "lp"}."""
    if kind == "short":
        return encode_shortest_path(rw)
    if kind == "adj":
        return encode_adjacency_powers(rw, powers=powers)
    if kind == "lp":
        return encode_spectral(rw, q=q, sign_seed=sign_seed)
    raise PositionalEncodingError(f"unknown positional encoding kind {kind!r}")
