"""
Experiment runners built on the toy model.

* NeighborsMatch: attainable problem radius as a function of the expansion radius r.
* Erdős retrieval: can the model tell every graph of a dataset apart once the graphs are
  fully connected and only the positional encoding carries the topology?
* Homophily study: per-node accuracy on SBM graphs, bucketed by homophily, for several r.

Every cell is trained once per seed; tables report the mean and standard deviation.
"""

# Standard imports
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

# Third party imports
import matplotlib.pyplot as plt
import pandas as pd
from loguru import logger

# Internal imports
from src.hoprewire.dataset_io import write_atomic
from src.hoprewire.encode import (
    encode_adjacency_powers,
    encode_shortest_path,
    encode_spectral,
)
from src.hoprewire.generate import (
    gen_erdos_retrieval_dataset,
    gen_neighborsmatch,
    gen_sbm,
    spawn_rngs,
)
from src.hoprewire.graph import AttributedGraph, homophily_buckets, max_finite_distance
from src.hoprewire.parallel import map_graphs
from src.hoprewire.rewire import RewiredGraph, add_cls_node, expand_receptive_field
from src.hoprewire.toy_gnn.model import ToyModel, infer_model_config
from src.hoprewire.toy_gnn.train import TrainConfig, TrainResult, evaluate, train


def _seeded(tc: TrainConfig, seed: int, **updates: object) -> TrainConfig:
    return tc.model_copy(update={"seed": seed, **updates})


def _summarize(rows: list[dict], keys: list[str]) -> pd.DataFrame:
    """Mean/std of per-seed accuracies, mean epoch counts, per cell."""
    frame = pd.DataFrame(rows)
    grouped = frame.groupby(keys, sort=False)
    summary = grouped.agg(
        accuracy=("accuracy", "mean"),
        accuracy_std=("accuracy", "std"),
        epochs=("epochs", "mean"),
    ).reset_index()
    summary["accuracy_std"] = summary["accuracy_std"].fillna(0.0)
    return summary


# NeighborsMatch


def neighborsmatch_dataset(
    depth: int, r: int, use_cls: bool, num_graphs: int, seed: int
) -> list[RewiredGraph]:
    """Trees of depth ``depth``, expanded to radius r (plus CLS), with an adjacency encoding."""
    encoded = []
    for rng in spawn_rngs(seed, num_graphs):
        rewired = expand_receptive_field(gen_neighborsmatch(depth, rng), r)
        if use_cls:
            rewired = add_cls_node(rewired)
        encoded.append(encode_adjacency_powers(rewired))
    return encoded


def _neighborsmatch_cell(
    cell: tuple[int, int, bool, int],
    tc: TrainConfig,
    num_graphs: int,
    hidden_dim: int,
    heads: int,
) -> dict:
    r, depth, use_cls, seed = cell
    graphs = neighborsmatch_dataset(depth, r, use_cls, num_graphs, seed)
    config = infer_model_config(
        graphs,
        readout="root",
        layers=depth + 1,
        hidden_dim=hidden_dim,
        heads=heads,
        seed=seed,
        out_dim=2**depth,
    )
    result = train(ToyModel(config), graphs, _seeded(tc, seed))
    logger.info(
        f"NeighborsMatch r={r} r_p={depth} cls={use_cls} seed={seed}: "
        f"accuracy {result.final_accuracy:.3f} after {len(result.history)} epochs"
    )
    return {
        "r": r,
        "r_p": depth,
        "cls": use_cls,
        "seed": seed,
        "accuracy": result.final_accuracy,
        "epochs": len(result.history),
    }


def run_neighborsmatch(
    r_grid: Sequence[int],
    rp_grid: Sequence[int],
    use_cls: bool,
    tc: TrainConfig,
    seeds: Sequence[int] = (0,),
    num_graphs: int = 128,
    hidden_dim: int = 32,
    heads: int = 4,
    workers: int | None = None,
) -> pd.DataFrame:
    """Final training accuracy for every (r, r_p) cell, L = r_p + 1 layers.

    Args:
        r_grid: Expansion radii
        rp_grid: Problem radii (tree depths)
        use_cls: Add a CLS node after expansion
        tc: Training settings; the seed is replaced per run
        seeds: One training run per seed
        num_graphs: Trees per dataset
        hidden_dim: Model width d
        heads: Attention heads
        workers: Cells trained in parallel

    Returns:
        Table with columns r, r_p, cls, accuracy, accuracy_std, epochs
    """
    if not r_grid or not rp_grid or not seeds:
        raise ValueError("r_grid, rp_grid and seeds must be non-empty")
    cells = [(r, depth, use_cls, seed) for r in r_grid for depth in rp_grid for seed in seeds]
    rows = map_graphs(
        lambda cell: _neighborsmatch_cell(cell, tc, num_graphs, hidden_dim, heads),
        cells,
        workers=workers,
    )
    return _summarize(rows, ["r", "r_p", "cls"])


def attainable_radius(table: pd.DataFrame, threshold: float = 0.95) -> dict[int, int]:
    """Largest r_p reaching ``threshold`` accuracy, per r (0 if none)."""
    radius = {}
    for r, rows in table.groupby("r"):
        solved = rows.loc[rows["accuracy"] >= threshold, "r_p"]
        radius[int(r)] = int(solved.max()) if not solved.empty else 0
    return radius


# Erdős retrieval


@dataclass
class RetrievalResult:
    """Summary table and per-epoch training curves of an Erdős retrieval run."""

    summary: pd.DataFrame
    curves: pd.DataFrame


def _encode_variant(rewired: RewiredGraph, variant: str, q: int | None) -> RewiredGraph:
    if variant == "none":
        return rewired
    if variant == "short":
        return encode_shortest_path(rewired)
    if variant == "lp":
        return encode_spectral(rewired, q=q)
    if variant.startswith("adj-"):
        return encode_adjacency_powers(rewired, powers=int(variant.split("-", 1)[1]))
    raise ValueError(f"unknown encoding variant {variant!r}")


def retrieval_variants(pe_kinds: Sequence[str], r_for_adj: Sequence[int]) -> list[str]:
    """Expand ``"adj"`` into one ``"adj-k"`` variant per power-vector length."""
    variants = []
    for kind in pe_kinds:
        if kind == "adj":
            variants.extend(f"adj-{k}" for k in r_for_adj)
        else:
            variants.append(kind)
    return variants


def run_erdos_retrieval(
    pe_kinds: Sequence[str],
    r_for_adj: Sequence[int],
    tc: TrainConfig,
    seeds: Sequence[int] = (0,),
    num_graphs: int = 30,
    n: int = 20,
    p: float = 0.2,
    q: int | None = None,
    hidden_dim: int = 32,
    heads: int = 4,
    layers: int = 4,
    workers: int | None = None,
) -> RetrievalResult:
    """Train a mean-pool classifier whose label is the graph's own index.

    The graphs are expanded up to their largest finite hop distance, so every connected
    component becomes a clique and only the positional encoding tells graphs apart.

    Returns:
        Summary (pe_kind, accuracy, accuracy_std, epochs, epochs_to_full) and curves
        (pe_kind, seed, epoch, train_loss, train_acc)
    """
    variants = retrieval_variants(pe_kinds, r_for_adj)
    if not variants or not seeds:
        raise ValueError("pe_kinds and seeds must be non-empty")

    def run_cell(cell: tuple[str, int]) -> tuple[dict, list[dict]]:
        variant, seed = cell
        graphs = gen_erdos_retrieval_dataset(num_graphs, n, p, seed)
        radius = max(max_finite_distance(graphs), 1)
        encoded = [_encode_variant(expand_receptive_field(g, radius), variant, q) for g in graphs]
        config = infer_model_config(
            encoded,
            readout="mean-pool",
            layers=layers,
            hidden_dim=hidden_dim,
            heads=heads,
            seed=seed,
            out_dim=num_graphs,
        )
        result = train(ToyModel(config), encoded, _seeded(tc, seed, target_accuracy=1.0))
        logger.info(
            f"Erdos retrieval {variant} seed={seed}: accuracy {result.final_accuracy:.3f} "
            f"after {len(result.history)} epochs"
        )
        row = {
            "pe_kind": variant,
            "seed": seed,
            "accuracy": result.final_accuracy,
            "epochs": len(result.history),
            "epochs_to_full": result.epochs_to(1.0),
        }
        curve = [
            {
                "pe_kind": variant,
                "seed": seed,
                "epoch": record.epoch,
                "train_loss": record.train_loss,
                "train_acc": record.train_acc,
            }
            for record in result.history
        ]
        return row, curve

    outcomes = map_graphs(run_cell, [(v, s) for v in variants for s in seeds], workers=workers)
    rows = [row for row, _ in outcomes]
    summary = _summarize(rows, ["pe_kind"])
    to_full = pd.DataFrame(rows).groupby("pe_kind", sort=False)["epochs_to_full"].mean()
    summary["epochs_to_full"] = summary["pe_kind"].map(to_full)
    curves = pd.DataFrame([point for _, curve in outcomes for point in curve])
    return RetrievalResult(summary=summary, curves=curves)


# Homophily study


def sbm_dataset(
    num_graphs: int,
    block_sizes: Sequence[int],
    p_in: float,
    p_out_range: tuple[float, float],
    seed: int,
) -> list[AttributedGraph]:
    """SBM graphs whose inter-block probability is drawn per graph from ``p_out_range``."""
    graphs = []
    for rng in spawn_rngs(seed, num_graphs):
        p_out = float(rng.uniform(*p_out_range))
        graphs.append(gen_sbm(list(block_sizes), p_in, p_out, rng))
    return graphs


def run_homophily_study(
    r_values: Sequence[int],
    bucket_count: int,
    tc: TrainConfig,
    seeds: Sequence[int] = (0,),
    num_graphs: int = 60,
    block_sizes: Sequence[int] = (8, 8, 8),
    p_in: float = 0.5,
    p_out_range: tuple[float, float] = (0.02, 0.4),
    test_fraction: float = 0.5,
    hidden_dim: int = 32,
    heads: int = 4,
    layers: int = 2,
    workers: int | None = None,
) -> pd.DataFrame:
    """Per-node accuracy on held-out SBM graphs, bucketed by homophily, for every r.

    Returns:
        Table with columns r, bucket, homophily_low, homophily_high, accuracy, accuracy_std
    """
    if not r_values or not seeds:
        raise ValueError("r_values and seeds must be non-empty")

    def run_cell(cell: tuple[int, int]) -> list[dict]:
        r, seed = cell
        graphs = sbm_dataset(num_graphs, block_sizes, p_in, p_out_range, seed)
        split = max(1, int(round(len(graphs) * (1.0 - test_fraction))))
        train_graphs, test_graphs = graphs[:split], graphs[split:] or graphs[:split]
        train_set = [encode_adjacency_powers(expand_receptive_field(g, r)) for g in train_graphs]
        test_set = [encode_adjacency_powers(expand_receptive_field(g, r)) for g in test_graphs]
        config = infer_model_config(
            train_set,
            task="per-node-multiclass",
            readout="per-node",
            layers=layers,
            hidden_dim=hidden_dim,
            heads=heads,
            seed=seed,
            out_dim=len(block_sizes),
        )
        result: TrainResult = train(ToyModel(config), train_set, _seeded(tc, seed))
        rows = []
        for index, bucket in enumerate(homophily_buckets(test_graphs, bucket_count)):
            if not bucket.indices:
                continue
            _, accuracy = evaluate(result.model, [test_set[i] for i in bucket.indices])
            rows.append(
                {
                    "r": r,
                    "seed": seed,
                    "bucket": index,
                    "homophily_low": bucket.low,
                    "homophily_high": bucket.high,
                    "accuracy": accuracy,
                }
            )
        logger.info(f"Homophily study r={r} seed={seed}: {len(rows)} buckets evaluated")
        return rows

    outcomes = map_graphs(run_cell, [(r, s) for r in r_values for s in seeds], workers=workers)
    frame = pd.DataFrame([row for rows in outcomes for row in rows])
    summary = (
        frame.groupby(["r", "bucket"], sort=False)
        .agg(
            homophily_low=("homophily_low", "min"),
            homophily_high=("homophily_high", "max"),
            accuracy=("accuracy", "mean"),
            accuracy_std=("accuracy", "std"),
        )
        .reset_index()
    )
    summary["accuracy_std"] = summary["accuracy_std"].fillna(0.0)
    return summary


# Output


def write_table(table: pd.DataFrame, path: str | Path) -> None:
    """Write a result table as CSV, atomically."""
    write_atomic(path, table.to_csv(index=False).splitlines())
    logger.info(f"Wrote {len(table)} rows to {path}")


def plot_curves(curves: pd.DataFrame, path: str | Path, title: str = "Training accuracy") -> None:
    """Plot mean training accuracy per epoch, one line per encoding variant."""
    plt.figure(figsize=(10, 6))
    for variant, rows in curves.groupby("pe_kind", sort=False):
        mean_curve = rows.groupby("epoch")["train_acc"].mean()
        plt.plot(mean_curve.index, mean_curve.values, label=str(variant), linewidth=2)

    plt.xlabel("Epoch", fontsize=12)
    plt.ylabel("Train accuracy", fontsize=12)
    plt.ylim(-0.02, 1.02)
    plt.title(title, fontsize=14)
    plt.legend()
    plt.grid(True, alpha=0.3)
    plt.tight_layout()
    plt.savefig(path)
    plt.close()
    logger.info(f"Saved accuracy curves to {path}")


def plot_radius(table: pd.DataFrame, path: str | Path) -> None:
    """Plot NeighborsMatch accuracy against the problem radius, one line per r."""
    plt.figure(figsize=(10, 6))
    for (r, use_cls), rows in table.groupby(["r", "cls"], sort=False):
        label = f"r={r}" + (" + CLS" if use_cls else "")
        plt.errorbar(
            rows["r_p"], rows["accuracy"], yerr=rows["accuracy_std"], label=label, marker="o"
        )

    plt.xlabel("Problem radius", fontsize=12)
    plt.ylabel("Train accuracy", fontsize=12)
    plt.ylim(-0.02, 1.02)
    plt.title("NeighborsMatch accuracy by receptive field", fontsize=14)
    plt.legend()
    plt.grid(True, alpha=0.3)
    plt.tight_layout()
    plt.savefig(path)
    plt.close()
    logger.info(f"Saved radius plot to {path}")

