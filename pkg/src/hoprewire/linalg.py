"""
Deterministic numerical kernels on small dense graphs.

Hop distances use scipy's unweighted Dijkstra on the undirected view of the edge list,
walk counts use checked int64 products, and the normalized Laplacian is diagonalized
with a cyclic Jacobi solver (round-robin pair ordering, no randomness).
"""

# Standard imports
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

# Third party imports
import numpy as np
from loguru import logger
from scipy import sparse
from scipy.sparse import csgraph

# Internal imports
from config.settings import settings
from src.hoprewire.errors import ConvergenceError, WalkCountOverflowError

UNREACHABLE = -1

# 2**62: headroom below int64 max for the float64 row-sum bound
_WALK_COUNT_LIMIT = float(2**62)
_SIGN_EPS = 1e-12


class Topology(Protocol):
    """Anything exposing a node count and an (m, 2) directed edge array."""

    @property
    def num_nodes(self) -> int: ...

    @property
    def edges(self) -> np.ndarray: ...


@dataclass(frozen=True)
class AdjacencyPowers:
    """Walk-count matrices A^1 .. A^r of the undirected adjacency matrix.

    Attributes:
        r: Largest power
        powers: ``powers[k - 1]`` is the int64 matrix A^k
    """

    r: int
    powers: list[np.ndarray]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix.

    Attributes:
        eigenvalues: Ascending eigenvalues, shape (n,)
        eigenvectors: Orthonormal eigenvectors as columns, shape (n, n)
        sweeps: Jacobi sweeps used
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


def _undirected_csgraph(g: Topology) -> sparse.csr_matrix:
    n = g.num_nodes
    edges = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    data = np.ones(edges.shape[0], dtype=np.float64)
    matrix = sparse.coo_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
    # duplicates from both directions collapse to one undirected edge
    matrix.data[:] = 1.0
    return matrix


def _to_hops(distances: np.ndarray) -> np.ndarray:
    hops = np.full(distances.shape, UNREACHABLE, dtype=np.int64)
    finite = np.isfinite(distances)
    hops[finite] = distances[finite].astype(np.int64)
    return hops


def all_pairs_hop_distances(g: Topology, cap: int | None = None) -> np.ndarray:
    """All-pairs unweighted hop distances ignoring edge direction.

    Args:
        g: Graph topology
        cap: Largest distance to report; farther pairs are ``UNREACHABLE``

    Returns:
        (n, n) int64 matrix with ``UNREACHABLE`` (-1) for pairs beyond the cap or in
        different connected components
    """
    n = g.num_nodes
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    limit = np.inf if cap is None else float(cap)
    distances = csgraph.dijkstra(
        _undirected_csgraph(g), directed=False, unweighted=True, limit=limit
    )
    return _to_hops(np.atleast_2d(distances))


def bfs_distances(g: Topology, source: int, cap: int | None = None) -> np.ndarray:
    """Hop distances from one source, truncated at ``cap``.

    Args:
        g: Graph topology
        source: Source node index
        cap: Largest distance to report (``None`` for no truncation)

    Returns:
        (n,) int64 array, ``UNREACHABLE`` (-1) beyond the cap or in another component
    """
    if not 0 <= source < g.num_nodes:
        raise IndexError(f"source {source} out of range for {g.num_nodes} nodes")
    limit = np.inf if cap is None else float(cap)
    distances = csgraph.dijkstra(
        _undirected_csgraph(g), directed=False, unweighted=True, indices=source, limit=limit
    )
    return _to_hops(np.asarray(distances).reshape(-1))


def connected_components(g: Topology) -> np.ndarray:
    """Component id per node for the undirected view of the graph."""
    if g.num_nodes == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = csgraph.connected_components(_undirected_csgraph(g), directed=False)
    return labels.astype(np.int64)


def undirected_adjacency(g: Topology) -> np.ndarray:
    """Symmetric 0/1 int64 adjacency matrix: entry 1 iff either direction is an edge."""
    n = g.num_nodes
    adjacency = np.zeros((n, n), dtype=np.int64)
    edges = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    adjacency[edges[:, 0], edges[:, 1]] = 1
    adjacency[edges[:, 1], edges[:, 0]] = 1
    return adjacency


def adjacency_powers(g: Topology, r: int) -> AdjacencyPowers:
    """Exact walk counts A^1 .. A^r.

    Each product is guarded by the bound (P A)[i, j] <= sum_k P[i, k], which holds
    because A is 0/1.

    Args:
        g: Graph topology
        r: Largest power (>= 1)

    Returns:
        The adjacency powers

    Raises:
        WalkCountOverflowError: If A^k may not fit into int64
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    adjacency = undirected_adjacency(g)
    powers = [adjacency]
    for k in range(2, r + 1):
        previous = powers[-1]
        bound = float(previous.astype(np.float64).sum(axis=1).max(initial=0.0))
        if bound >= _WALK_COUNT_LIMIT:
            raise WalkCountOverflowError(power=k, bound=bound)
        powers.append(previous @ adjacency)
    return AdjacencyPowers(r=r, powers=powers)


def normalized_laplacian(g: Topology) -> np.ndarray:
    """Dense normalized Laplacian I - D^{-1/2} A D^{-1/2}.

    Isolated nodes use a zero D^{-1/2} entry, so their row and column equal the identity.
    """
    adjacency = undirected_adjacency(g).astype(np.float64)
    degrees = adjacency.sum(axis=1)
    inv_sqrt = np.zeros_like(degrees)
    connected = degrees > 0
    inv_sqrt[connected] = 1.0 / np.sqrt(degrees[connected])
    return np.eye(g.num_nodes) - inv_sqrt[:, None] * adjacency * inv_sqrt[None, :]


@lru_cache(maxsize=64)
def _round_robin(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Disjoint (p, q) pair sets whose union over one round trip is every pair p < q."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = sorted((min(a, b), max(a, b)) for a, b in pairs if a < n and b < n)
        rounds.append(
            (
                np.array([p for p, _ in pairs], dtype=np.int64),
                np.array([q for _, q in pairs], dtype=np.int64),
            )
        )
        players = [players[0], players[-1], *players[1:-1]]
    return tuple(rounds)


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its first non-negligible coordinate is positive."""
    vectors = vectors.copy()
    for column in range(vectors.shape[1]):
        nonzero = np.flatnonzero(np.abs(vectors[:, column]) > _SIGN_EPS)
        if nonzero.size and vectors[nonzero[0], column] < 0:
            vectors[:, column] *= -1.0
    return vectors


def symmetric_eigendecomposition(
    m: np.ndarray, tol: float | None = None, max_sweeps: int | None = None
) -> SpectralDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every pair (p, q) once, in round-robin rounds of disjoint pairs
    that are rotated together. Iteration stops when the off-diagonal Frobenius norm
    drops to ``tol * ||m||_F``.

    Args:
        m: Symmetric (n, n) matrix
        tol: Relative convergence threshold (defaults to ``settings.jacobi_tol``)
        max_sweeps: Sweep cap (defaults to ``settings.jacobi_max_sweeps``)

    Returns:
        Ascending eigenvalues and orthonormal, sign-canonical eigenvectors

    Raises:
        ValueError: If ``m`` is not square and symmetric within ``settings.symmetry_tol``
        ConvergenceError: If the sweep cap is reached, with the final residual
    """
    tol = settings.jacobi_tol if tol is None else tol
    max_sweeps = settings.jacobi_max_sweeps if max_sweeps is None else max_sweeps
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    asymmetry = float(np.max(np.abs(m - m.T), initial=0.0))
    if asymmetry > settings.symmetry_tol:
        raise ValueError(f"matrix is not symmetric (max |m - m^T| = {asymmetry:.3e})")

    n = m.shape[0]
    a = (m + m.T) / 2.0
    vectors = np.eye(n)
    threshold = tol * float(np.linalg.norm(a))
    rounds = _round_robin(n)

    sweeps = 0
    residual = _off_diagonal_norm(a)
    while residual > threshold:
        if sweeps == max_sweeps:
            raise ConvergenceError(sweeps=sweeps, residual=residual)
        for p_all, q_all in rounds:
            apq = a[p_all, q_all]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p_all[active], q_all[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p, col_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p, row_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0

            vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
            vectors[:, p] = c * vec_p - s * vec_q
            vectors[:, q] = s * vec_p + c * vec_q
        sweeps += 1
        residual = _off_diagonal_norm(a)

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    logger.debug(f"Jacobi converged in {sweeps} sweeps for n={n} (residual {residual:.2e})")
    return SpectralDecomposition(
        eigenvalues=eigenvalues[order],
        eigenvectors=_canonical_signs(vectors[:, order]),
        sweeps=sweeps,
    )


def heat_diffusion(
    decomposition: SpectralDecomposition, u0: np.ndarray, t: float, q: int | None = None
) -> np.ndarray:
    """Closed-form solution of u_t = -Δu at time t.

    u(t) = sum_i exp(-λ_i t) <u0, v_i> v_i, optionally truncated to the q + 1 lowest modes.
    """
    modes = decomposition.eigenvalues.shape[0] if q is None else min(q + 1, len(u0))
    vectors = decomposition.eigenvectors[:, :modes]
    decay = np.exp(-decomposition.eigenvalues[:modes] * t)
    return vectors @ (decay * (vectors.T @ np.asarray(u0, dtype=np.float64)))


def euler_heat_diffusion(
    laplacian: np.ndarray, u0: np.ndarray, t: float, step: float = 1e-4
) -> np.ndarray:
    """Explicit Euler integration of u_t = -Δu from 0 to t."""
    u = np.asarray(u0, dtype=np.float64).copy()
    for _ in range(int(math.floor(t / step + 0.5))):
        u = u - step * (laplacian @ u)
    return u
