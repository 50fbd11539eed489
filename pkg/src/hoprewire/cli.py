"""
Command-line front end: generate -> rewire -> encode -> stats / suggest-r -> train-toy.

Every data command reads and writes JSONL datasets, passes the ``gen_meta`` header through
unchanged and writes its output atomically. Results go to stdout, logs to stderr.

Exit codes: 0 success, 2 I/O error, 64 usage error, 65 data error, 70 numerical error.
"""

# Standard imports
import argparse
import json
import statistics
import sys
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Literal, NoReturn

# Third party imports
import numpy as np
import pandas as pd
from dotenv import load_dotenv
from loguru import logger
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

# Internal imports
from config.settings import settings
from src.hoprewire.dataset_io import (
    load_rewired_dataset,
    read_rewired_dataset,
    save_dataset,
)
from src.hoprewire.encode import encode
from src.hoprewire.errors import (
    ConfigError,
    GraphValidationError,
    HopRewireError,
    NumericalError,
)
from src.hoprewire.generate import GeneratorSpec, gen_meta, generate_dataset
from src.hoprewire.graph import AttributedGraph, density, max_finite_distance
from src.hoprewire.parallel import map_graphs
from src.hoprewire.rewire import (
    RewiredGraph,
    add_cls_node,
    expand_receptive_field,
    original_subgraph,
    recover_original,
    strip_provenance,
)
from src.hoprewire.toy_gnn.experiments import (
    plot_curves,
    plot_radius,
    run_erdos_retrieval,
    run_homophily_study,
    run_neighborsmatch,
    write_table,
)
from src.hoprewire.toy_gnn.model import ToyModel, infer_model_config
from src.hoprewire.toy_gnn.train import TrainConfig, evaluate, train

EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NUMERICAL = 70

Command = Literal["generate", "rewire", "encode", "recover", "stats", "suggest-r", "train-toy"]
Experiment = Literal["neighborsmatch", "erdos", "homophily", "dataset"]

NEEDS_INPUT = {"rewire", "encode", "recover", "stats", "suggest-r"}
NEEDS_OUTPUT = {"generate", "rewire", "encode", "recover"}
TRAIN_FIELDS = (
    "initial_lr",
    "patience",
    "max_epochs",
    "max_minutes",
    "batch_size",
    "target_accuracy",
)


def _parse_list(value: Any) -> Any:
    """Accept ``"1,2,3"`` and ``"1..5"`` as well as JSON lists."""
    if not isinstance(value, str):
        return value
    items: list[str] = []
    for part in (p.strip() for p in value.split(",")):
        if ".." in part:
            low, high = part.split("..", 1)
            items.extend(str(i) for i in range(int(low), int(high) + 1))
        elif part:
            items.append(part)
    return items


class PipelineConfig(BaseModel):
    """Validated flags of one command invocation (merged over an optional JSON config)."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    input: Path | None = None
    output: Path | None = None
    workers: int | None = Field(default=None, ge=1)
    verbose: bool = False

    family: str | None = None
    num: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    n: int | None = None
    p: float | None = None
    depth: int | None = None
    block_sizes: list[int] | None = None
    p_in: float | None = None
    p_out: float | None = None

    r: int = Field(default=1, ge=1)
    cls: bool = False
    ce_const: list[float] | None = None
    cv_const: list[float] | None = None

    pe: Literal["short", "adj", "lp"] | None = None
    q: int | None = Field(default=None, ge=1)
    sign_seed: int | None = Field(default=None, ge=0)
    powers: int | None = Field(default=None, ge=1)
    drop_provenance: bool = False

    r_max: int = Field(default=4, ge=1)

    experiment: Experiment | None = None
    r_grid: list[int] = Field(default_factory=lambda: [1, 2])
    rp_grid: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    pe_kinds: list[Literal["short", "adj", "lp", "none"]] = Field(
        default_factory=lambda: ["short", "adj", "lp", "none"]
    )
    adj_powers: list[int] = Field(default_factory=lambda: [5, 10])
    seeds: list[int] = Field(default_factory=lambda: [0])
    num_graphs: int | None = Field(default=None, ge=1)
    buckets: int = Field(default=3, ge=1)
    hidden_dim: int = Field(default=32, ge=1)
    heads: int = Field(default=4, ge=1)
    layers: int | None = Field(default=None, ge=1)
    task: Literal["multiclass", "per-node-multiclass", "regression"] = "multiclass"
    readout: Literal["mean-pool", "sum-pool", "cls-feature", "per-node", "root"] = "mean-pool"
    val_input: Path | None = None
    history: Path | None = None
    curves: Path | None = None
    plot: Path | None = None

    initial_lr: float | None = None
    patience: int | None = None
    max_epochs: int | None = None
    max_minutes: float | None = None
    batch_size: int | None = None
    target_accuracy: float | None = None

    @field_validator(
        "block_sizes",
        "ce_const",
        "cv_const",
        "r_grid",
        "rp_grid",
        "pe_kinds",
        "adj_powers",
        "seeds",
        mode="before",
    )
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _parse_list(value)

    @model_validator(mode="after")
    def _check_consistency(self) -> "PipelineConfig":
        if self.command in NEEDS_INPUT and self.input is None:
            raise ValueError(f"{self.command} needs --input")
        if self.command in NEEDS_OUTPUT and self.output is None:
            raise ValueError(f"{self.command} needs --output")
        if self.command == "generate" and self.family is None:
            raise ValueError("generate needs a family")
        if self.command == "encode" and self.pe is None:
            raise ValueError("encode needs --pe")
        if self.command == "encode":
            if (self.q is not None or self.sign_seed is not None) and self.pe != "lp":
                raise ValueError("--q and --sign-seed only apply to --pe lp")
            if self.powers is not None and self.pe != "adj":
                raise ValueError("--powers only applies to --pe adj")
        if self.command == "train-toy":
            if self.experiment is None:
                raise ValueError("train-toy needs an experiment")
            if self.experiment == "dataset" and self.input is None:
                raise ValueError("train-toy dataset needs --input")
            if not self.seeds:
                raise ValueError("--seeds must not be empty")
        return self

    def train_config(self) -> TrainConfig:
        """TrainConfig from the training flags that were given."""
        given = {name: getattr(self, name) for name in TRAIN_FIELDS}
        return TrainConfig(**{k: v for k, v in given.items() if v is not None})

    def generator_spec(self) -> GeneratorSpec:
        return GeneratorSpec(
            family=self.family,  # type: ignore[arg-type]
            count=self.num,
            seed=self.seed,
            n=self.n,
            p=self.p,
            depth=self.depth,
            block_sizes=self.block_sizes,
            p_in=self.p_in,
            p_out=self.p_out,
        )


class PipelineArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 64."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: {message}\n")


def build_parser() -> PipelineArgumentParser:
    common = {"argument_default": argparse.SUPPRESS}
    parser = PipelineArgumentParser(
        prog="hop-rewire",
        description="Expand receptive fields, attach positional encodings, run toy experiments.",
        **common,
    )
    parser.add_argument("--config", type=Path, help="JSON object of default flag values")
    parser.add_argument("--workers", type=int, help="Threads for per-graph work")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=PipelineArgumentParser
    )

    generate = commands.add_parser("generate", help="Generate a synthetic dataset", **common)
    generate.add_argument("family", choices=["erdos", "neighborsmatch", "sbm", "path", "complete"])
    generate.add_argument("--output", type=Path, help="Dataset to write")
    generate.add_argument("--num", type=int, help="Number of graphs")
    generate.add_argument("--seed", type=int, help="Root seed")
    generate.add_argument("--n", type=int, help="Node count (erdos, path, complete)")
    generate.add_argument("--p", type=float, help="Edge probability (erdos)")
    generate.add_argument("--depth", type=int, help="Tree depth (neighborsmatch)")
    generate.add_argument("--block-sizes", type=str, help="Comma-separated block sizes (sbm)")
    generate.add_argument("--p-in", type=float, help="Intra-block probability (sbm)")
    generate.add_argument("--p-out", type=float, help="Inter-block probability (sbm)")

    rewire = commands.add_parser("rewire", help="Expand to r hops, optionally add CLS", **common)
    rewire.add_argument("--input", type=Path, help="Dataset to read")
    rewire.add_argument("--output", type=Path, help="Dataset to write")
    rewire.add_argument("--r", type=int, help="Expansion radius")
    rewire.add_argument("--cls", action="store_true", help="Append a CLS node")
    rewire.add_argument("--ce-const", type=str, help="Feature of added edges (value or list)")
    rewire.add_argument("--cv-const", type=str, help="Feature of the CLS node (value or list)")

    enc = commands.add_parser("encode", help="Attach a positional encoding", **common)
    enc.add_argument("--input", type=Path, help="Rewired dataset to read")
    enc.add_argument("--output", type=Path, help="Dataset to write")
    enc.add_argument("--pe", choices=["short", "adj", "lp"], help="Encoding kind")
    enc.add_argument("--q", type=int, help="Spectral coordinates (lp)")
    enc.add_argument("--sign-seed", type=int, help="Random eigenvector signs (lp)")
    enc.add_argument("--powers", type=int, help="Walk-count vector length (adj), defaults to r")
    enc.add_argument("--drop-provenance", action="store_true", help="Keep only the encoding")

    recover = commands.add_parser("recover", help="Rebuild the original graphs", **common)
    recover.add_argument("--input", type=Path, help="Rewired dataset to read")
    recover.add_argument("--output", type=Path, help="Dataset to write")

    stats = commands.add_parser("stats", help="Density and timing per expansion radius", **common)
    stats.add_argument("--input", type=Path, help="Dataset to read")
    stats.add_argument("--r-max", type=int, help="Largest radius to report")

    suggest = commands.add_parser("suggest-r", help="Smallest r with dense graphs", **common)
    suggest.add_argument("--input", type=Path, help="Dataset to read")

    toy = commands.add_parser("train-toy", help="Train the toy model", **common)
    toy.add_argument("experiment", choices=["neighborsmatch", "erdos", "homophily", "dataset"])
    toy.add_argument("--input", type=Path, help="Encoded training dataset (dataset)")
    toy.add_argument("--val-input", type=Path, help="Encoded validation dataset (dataset)")
    toy.add_argument("--output", type=Path, help="CSV result table (stdout if omitted)")
    toy.add_argument("--r", dest="r_grid", type=str, help="Expansion radii, e.g. 1,2")
    toy.add_argument("--rp", dest="rp_grid", type=str, help="Problem radii, e.g. 1..5")
    toy.add_argument("--cls", action="store_true", help="Add a CLS node (neighborsmatch)")
    toy.add_argument("--pe", dest="pe_kinds", type=str, help="Encodings, e.g. short,adj,lp,none")
    toy.add_argument("--adj-powers", type=str, help="Adjacency vector lengths, e.g. 5,10")
    toy.add_argument("--q", type=int, help="Spectral coordinates (erdos lp)")
    toy.add_argument("--seeds", type=str, help="Seeds, e.g. 0,1,2,3")
    toy.add_argument("--num-graphs", type=int, help="Graphs per dataset")
    toy.add_argument("--n", type=int, help="Nodes per graph (erdos)")
    toy.add_argument("--p", type=float, help="Edge probability (erdos)")
    toy.add_argument("--buckets", type=int, help="Homophily buckets (homophily)")
    toy.add_argument("--hidden-dim", type=int, help="Model width")
    toy.add_argument("--heads", type=int, help="Attention heads")
    toy.add_argument("--layers", type=int, help="Transformer layers")
    toy.add_argument("--task", choices=["multiclass", "per-node-multiclass", "regression"])
    toy.add_argument(
        "--readout", choices=["mean-pool", "sum-pool", "cls-feature", "per-node", "root"]
    )
    toy.add_argument("--initial-lr", type=float, help="Initial learning rate")
    toy.add_argument("--patience", type=int, help="Plateau patience in epochs")
    toy.add_argument("--max-epochs", type=int, help="Epoch cap")
    toy.add_argument("--max-minutes", type=float, help="Wall-clock cap per run")
    toy.add_argument("--batch-size", type=int, help="Graphs per step")
    toy.add_argument("--target-accuracy", type=float, help="Stop at this training accuracy")
    toy.add_argument("--history", type=Path, help="Training history JSONL (dataset)")
    toy.add_argument("--curves", type=Path, help="Training curves CSV (erdos)")
    toy.add_argument("--plot", type=Path, help="PNG plot of the results")
    return parser


def _configure_logging(verbose: bool) -> None:
    logger.remove()
    level = "DEBUG" if verbose or settings.debug else settings.log_level
    logger.add(sys.stderr, level=level)


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in values.items()}


def parse_config(argv: Sequence[str] | None = None) -> PipelineConfig:
    """Parse flags over the optional ``--config`` defaults and validate them."""
    flags = vars(build_parser().parse_args(argv))
    config_path = flags.pop("config", None)
    values = _read_config_file(config_path) if config_path is not None else {}
    values.update(flags)
    return PipelineConfig(**values)


def _constant(values: list[float] | None, dim: int) -> np.ndarray | None:
    """A feature constant; a single value is broadcast to ``dim``."""
    if values is None:
        return None
    if len(values) == 1:
        return np.full(dim, values[0])
    return np.asarray(values, dtype=float)


def _mean_density(graphs: Sequence[AttributedGraph | RewiredGraph]) -> float:
    plain = [g.graph if isinstance(g, RewiredGraph) else g for g in graphs]
    measurable = [g for g in plain if g.num_nodes > 0]
    return float(np.mean([density(g) for g in measurable])) if measurable else 0.0


def _originals(path: Path) -> list[AttributedGraph]:
    """Input graphs before any rewiring."""
    return [
        original_subgraph(rw) if rw.edge_provenance is not None else rw.graph
        for rw in load_rewired_dataset(path)
    ]


def cmd_generate(config: PipelineConfig) -> int:
    spec = config.generator_spec()
    graphs = generate_dataset(spec)
    save_dataset(graphs, config.output, gen_meta=gen_meta(spec))  # type: ignore[arg-type]
    print(f"generated {len(graphs)} '{spec.family}' graphs -> {config.output}")
    return EXIT_OK


def cmd_rewire(config: PipelineConfig) -> int:
    header, graphs = read_rewired_dataset(config.input)  # type: ignore[arg-type]

    def rewire_one(rw: RewiredGraph) -> RewiredGraph:
        c_e = _constant(config.ce_const, rw.graph.edge_dim)
        rewired = expand_receptive_field(rw, config.r, c_e=c_e)
        if config.cls:
            rewired = add_cls_node(rewired, c_v=_constant(config.cv_const, rw.graph.node_dim))
        return rewired

    rewired = map_graphs(rewire_one, graphs, workers=config.workers)
    save_dataset(rewired, config.output, gen_meta=header)  # type: ignore[arg-type]
    logger.info(f"Rewired {len(rewired)} graphs with r={config.r}, cls={config.cls}")
    print(
        f"rewired {len(rewired)} graphs: mean density "
        f"{_mean_density(graphs):.4f} -> {_mean_density(rewired):.4f}"
    )
    return EXIT_OK


def cmd_encode(config: PipelineConfig) -> int:
    header, graphs = read_rewired_dataset(
        config.input, require_rewired=config.pe in ("short", "adj")  # type: ignore[arg-type]
    )

    def encode_one(rw: RewiredGraph) -> RewiredGraph:
        kind = str(config.pe)
        encoded = encode(rw, kind, q=config.q, sign_seed=config.sign_seed, powers=config.powers)
        return strip_provenance(encoded) if config.drop_provenance else encoded

    encoded = map_graphs(encode_one, graphs, workers=config.workers)
    save_dataset(encoded, config.output, gen_meta=header)  # type: ignore[arg-type]
    print(f"encoded {len(encoded)} graphs with '{config.pe}' -> {config.output}")
    return EXIT_OK


def cmd_recover(config: PipelineConfig) -> int:
    header, graphs = read_rewired_dataset(config.input)  # type: ignore[arg-type]
    originals = map_graphs(recover_original, graphs, workers=config.workers)
    save_dataset(originals, config.output, gen_meta=header)  # type: ignore[arg-type]
    print(f"recovered {len(originals)} graphs -> {config.output}")
    return EXIT_OK


def _fully_connected(g: AttributedGraph) -> bool:
    return g.num_edges == g.num_nodes * (g.num_nodes - 1)


def stats_table(graphs: Sequence[AttributedGraph], r_max: int) -> pd.DataFrame:
    """Mean density, fully connected fraction and median rewire+encode time per radius."""
    rows = []
    for r in range(1, r_max + 1):
        expanded = []
        timings = []
        for g in graphs:
            started = time.perf_counter()
            rewired = expand_receptive_field(g, r)
            encode(rewired, "adj")
            timings.append(time.perf_counter() - started)
            expanded.append(rewired.graph)
        connected = [_fully_connected(g) for g in expanded]
        rows.append(
            {
                "r": r,
                "mean_density": _mean_density(expanded),
                "fully_connected": float(np.mean(connected)) if connected else 0.0,
                "median_ms": 1000.0 * statistics.median(timings) if timings else 0.0,
            }
        )
    return pd.DataFrame(rows)


def cmd_stats(config: PipelineConfig) -> int:
    graphs = _originals(config.input)  # type: ignore[arg-type]
    table = stats_table(graphs, config.r_max)
    print(table.to_string(index=False, float_format=lambda x: f"{x:.4f}"))
    return EXIT_OK


def suggest_r(graphs: Sequence[AttributedGraph]) -> tuple[int, list[tuple[int, float]], bool]:
    """Smallest r whose mean expanded density exceeds ``settings.density_threshold``.

    Returns:
        The radius, the density curve searched, and whether the threshold was exceeded
        (if not, the radius is the saturation point: the largest finite hop distance)

    Raises:
        GraphValidationError: If every graph is edgeless
    """
    if all(g.num_edges == 0 for g in graphs):
        raise GraphValidationError("all graphs are edgeless; density never grows with r")
    bound = max(max_finite_distance(graphs), 1)
    curve = []
    for r in range(1, bound + 1):
        value = _mean_density([expand_receptive_field(g, r) for g in graphs])
        curve.append((r, value))
        if value > settings.density_threshold:
            return r, curve, True
    return bound, curve, False


def cmd_suggest_r(config: PipelineConfig) -> int:
    r, curve, exceeded = suggest_r(_originals(config.input))  # type: ignore[arg-type]
    for radius, value in curve:
        print(f"r={radius} mean_density={value:.4f}")
    if not exceeded:
        logger.warning(
            f"Mean density never exceeds {settings.density_threshold}; "
            f"it saturates at {curve[-1][1]:.4f} for r={r}"
        )
    print(r)
    return EXIT_OK


def _emit_table(table: pd.DataFrame, output: Path | None) -> None:
    if output is None:
        print(table.to_string(index=False))
    else:
        write_table(table, output)


def cmd_train_toy(config: PipelineConfig) -> int:
    tc = config.train_config()
    if config.experiment == "neighborsmatch":
        table = run_neighborsmatch(
            config.r_grid,
            config.rp_grid,
            config.cls,
            tc,
            seeds=config.seeds,
            num_graphs=config.num_graphs or 128,
            hidden_dim=config.hidden_dim,
            heads=config.heads,
            workers=config.workers,
        )
        _emit_table(table, config.output)
        if config.plot is not None:
            plot_radius(table, config.plot)
    elif config.experiment == "erdos":
        result = run_erdos_retrieval(
            config.pe_kinds,
            config.adj_powers,
            tc,
            seeds=config.seeds,
            num_graphs=config.num_graphs or 30,
            n=config.n or 20,
            p=config.p if config.p is not None else 0.2,
            q=config.q,
            hidden_dim=config.hidden_dim,
            heads=config.heads,
            layers=config.layers or 4,
            workers=config.workers,
        )
        _emit_table(result.summary, config.output)
        if config.curves is not None:
            write_table(result.curves, config.curves)
        if config.plot is not None:
            plot_curves(result.curves, config.plot, title="Erdos retrieval training accuracy")
    elif config.experiment == "homophily":
        table = run_homophily_study(
            config.r_grid,
            config.buckets,
            tc,
            seeds=config.seeds,
            num_graphs=config.num_graphs or 60,
            hidden_dim=config.hidden_dim,
            heads=config.heads,
            layers=config.layers or 2,
            workers=config.workers,
        )
        _emit_table(table, config.output)
    else:
        train_set = load_rewired_dataset(config.input)  # type: ignore[arg-type]
        val_set = None if config.val_input is None else load_rewired_dataset(config.val_input)
        model_config = infer_model_config(
            train_set,
            task=config.task,
            readout=config.readout,
            hidden_dim=config.hidden_dim,
            heads=config.heads,
            layers=config.layers,
            seed=config.seeds[0],
        )
        tc = tc.model_copy(update={"seed": config.seeds[0]})
        result = train(ToyModel(model_config), train_set, tc, val_set, history_path=config.history)
        val_loss, val_acc = evaluate(result.model, val_set or train_set, tc.batch_size)
        print(
            f"trained {len(result.history)} epochs ({result.stop_reason}): "
            f"train_acc={result.final_accuracy:.4f} "
            f"val_loss={val_loss:.4f} val_acc={val_acc:.4f}"
        )
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "rewire": cmd_rewire,
    "encode": cmd_encode,
    "recover": cmd_recover,
    "stats": cmd_stats,
    "suggest-r": cmd_suggest_r,
    "train-toy": cmd_train_toy,
}


def _fail(code: int, message: str) -> int:
    logger.error(message)
    print(f"error: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code."""
    load_dotenv()
    _configure_logging("--verbose" in (sys.argv[1:] if argv is None else argv))
    try:
        config = parse_config(argv)
        logger.debug(f"Running {config.command} with {config.model_dump(exclude_defaults=True)}")
        return COMMANDS[config.command](config)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, f"input not found: {exc.filename or exc}")
    except OSError as exc:
        return _fail(EXIT_IO, f"I/O error: {exc}")
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "config"
        return _fail(EXIT_USAGE, f"invalid {location}: {first['msg']}")
    except ConfigError as exc:
        return _fail(EXIT_USAGE, str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, str(exc))
    except (HopRewireError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))


if __name__ == "__main__":
    sys.exit(main())
