"""
Small graph builders and oracles shared by the test modules.
"""

# Standard imports
from collections import defaultdict

# Third party imports
import networkx as nx
import numpy as np

# Internal imports
from src.hoprewire.generate import gen_neighborsmatch, gen_sbm, spawn_rngs
from src.hoprewire.graph import AttributedGraph


def undirected(num_nodes: int, pairs: list[tuple[int, int]], **fields) -> AttributedGraph:
    """Graph with both directions of every pair, in pair order."""
    edges = [edge for u, v in pairs for edge in ((u, v), (v, u))]
    return AttributedGraph(num_nodes=num_nodes, edges=np.array(edges).reshape(-1, 2), **fields)


def random_erdos(rng: np.random.Generator, max_n: int = 30) -> AttributedGraph:
    """Connected-ish G(n, p) with random node and edge features."""
    n = int(rng.integers(3, max_n + 1))
    p = float(rng.uniform(0.15, 0.4))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    edges = [edge for u, v in pairs for edge in ((u, v), (v, u))]
    return AttributedGraph(
        num_nodes=n,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        node_features=rng.normal(size=(n, 2)),
        edge_features=rng.normal(size=(len(edges), 1)),
        graph_label=int(rng.integers(3)),
    )


def graph_zoo(count: int, seed: int) -> list[AttributedGraph]:
    """``count`` graphs of each family: Erdős, SBM and NeighborsMatch trees."""
    graphs = []
    for rng in spawn_rngs(seed, count):
        graphs.append(random_erdos(rng))
        sizes = [int(s) for s in rng.integers(3, 8, size=int(rng.integers(2, 4)))]
        graphs.append(gen_sbm(sizes, 0.5, 0.1, rng))
        graphs.append(gen_neighborsmatch(int(rng.integers(1, 4)), rng))
    return graphs


def to_networkx(g: AttributedGraph) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(g.num_nodes))
    graph.add_edges_from((int(u), int(v)) for u, v in g.edges)
    return graph


def walk_counts(g: AttributedGraph, max_length: int) -> list[dict[tuple[int, int], int]]:
    """Walk counts per length by expanding walks one step at a time from every source."""
    neighbors: dict[int, set[int]] = defaultdict(set)
    for u, v in g.edges:
        neighbors[int(u)].add(int(v))
        neighbors[int(v)].add(int(u))
    counts: list[dict[tuple[int, int], int]] = [defaultdict(int) for _ in range(max_length)]
    for source in range(g.num_nodes):
        frontier = {source: 1}
        for length in range(max_length):
            step: dict[int, int] = defaultdict(int)
            for node, ways in frontier.items():
                for nxt in neighbors[node]:
                    step[nxt] += ways
            for target, ways in step.items():
                counts[length][(source, target)] = ways
            frontier = step
    return counts


def erdos_graphs(count: int, seed: int, max_n: int = 30) -> list[AttributedGraph]:
    """Random graphs sharing d_v = 2 and d_e = 1, so they form one dataset."""
    return [random_erdos(rng, max_n) for rng in spawn_rngs(seed, count)]
