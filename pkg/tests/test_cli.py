# Standard imports
import json

# Third party imports
import pytest

# Internal imports
from src.hoprewire.cli import (
    EXIT_DATA,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    main,
    parse_config,
    stats_table,
    suggest_r,
)
from src.hoprewire import dataset_io
from src.hoprewire.dataset_io import load_dataset, load_rewired_dataset
from src.hoprewire.errors import GraphValidationError
from src.hoprewire.generate import gen_complete, gen_path
from src.hoprewire.graph import AttributedGraph


def run(*args) -> int:
    return main([str(arg) for arg in args])


@pytest.fixture
def path_dataset(tmp_path):
    path = tmp_path / "path.jsonl"
    assert run("generate", "path", "--n", 5, "--num", 2, "--output", path) == EXIT_OK
    return path


def test_generate_writes_header_and_graphs(tmp_path, capsys):
    path = tmp_path / "erdos.jsonl"
    code = run("generate", "erdos", *"--num 10 --n 12 --p 0.3 --seed 4".split(), "--output", path)
    assert code == EXIT_OK
    header = json.loads(path.read_text().splitlines()[0])
    assert header["gen_meta"]["family"] == "erdos"
    assert "rng" in header["gen_meta"]
    graphs = load_dataset(path)
    assert [g.graph_label for g in graphs] == list(range(10))
    assert "generated 10 'erdos' graphs" in capsys.readouterr().out


def test_generate_sbm_parses_block_sizes(tmp_path):
    path = tmp_path / "sbm.jsonl"
    code = run(
        "generate", "sbm", "--block-sizes", "3,4", "--p-in", 0.5, "--p-out", 0.1, "--output", path
    )
    assert code == EXIT_OK
    (g,) = load_dataset(path)
    assert g.node_labels.tolist() == [0, 0, 0, 1, 1, 1, 1]


def test_rewire_reports_density(tmp_path, path_dataset, capsys):
    out = tmp_path / "r2.jsonl"
    assert run("rewire", "--input", path_dataset, "--output", out, "--r", 2) == EXIT_OK
    assert "mean density 0.3200 -> 0.5600" in capsys.readouterr().out
    assert all(rw.r == 2 for rw in load_rewired_dataset(out))


def test_rewire_with_cls_and_constants(tmp_path, path_dataset):
    out = tmp_path / "cls.jsonl"
    code = run(
        "rewire", "--input", path_dataset, "--output", out, "--r", 2, "--cls", "--cv-const", 3
    )
    assert code == EXIT_OK
    rw = load_rewired_dataset(out)[0]
    assert rw.cls_node == 5
    assert rw.graph.node_features[-1].tolist() == [3.0]


@pytest.mark.parametrize("command", [["rewire", "--r", 2], ["recover"]])
def test_commands_read_their_input_once(tmp_path, path_dataset, monkeypatch, command):
    calls = []
    read_records = dataset_io.read_records

    def counting(path):
        calls.append(path)
        return read_records(path)

    monkeypatch.setattr(dataset_io, "read_records", counting)
    out = tmp_path / "out.jsonl"
    assert run(*command, "--input", path_dataset, "--output", out) == EXIT_OK
    assert len(calls) == 1
    assert json.loads(out.read_text().splitlines()[0])["gen_meta"]["family"] == "path"


def test_rewire_is_deterministic(tmp_path, path_dataset):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run("rewire", "--input", path_dataset, "--output", first, "--r", 3, "--cls")
    run("rewire", "--input", path_dataset, "--output", second, "--r", 3, "--cls")
    assert first.read_bytes() == second.read_bytes()


def test_missing_input_is_an_io_error(tmp_path, capsys):
    code = run("rewire", "--input", tmp_path / "nope.jsonl", "--output", tmp_path / "o.jsonl")
    assert code == EXIT_IO
    assert "input not found" in capsys.readouterr().err


def test_edge_encoding_needs_rewired_input(tmp_path, path_dataset, capsys):
    code = run("encode", "--input", path_dataset, "--output", tmp_path / "o.jsonl", "--pe=short")
    assert code == EXIT_DATA
    assert "run rewire first" in capsys.readouterr().err


def test_spectral_padding_warning(tmp_path, capsys):
    source = tmp_path / "k3.jsonl"
    run("generate", "complete", "--n", 3, "--output", source)
    code = run("encode", "--input", source, "--output", tmp_path / "lp.jsonl", "--pe=lp", "--q=4")
    assert code == EXIT_OK
    assert "padding 2 columns" in capsys.readouterr().err


def test_spectral_flags_need_lp(tmp_path, path_dataset):
    output = tmp_path / "o.jsonl"
    code = run("encode", "--input", path_dataset, "--output", output, "--pe=short", "--q=4")
    assert code == EXIT_USAGE


@pytest.mark.parametrize("kind", ["short", "adj"])
def test_recover_from_encoding_alone_is_byte_identical(tmp_path, path_dataset, kind):
    rewired, encoded, recovered = (tmp_path / f"{name}.jsonl" for name in ("rw", "pe", "rec"))
    assert run("rewire", "--input", path_dataset, "--output", rewired, "--r", 2, "--cls") == 0
    code = run(
        "encode", "--input", rewired, "--output", encoded, "--pe", kind, "--drop-provenance"
    )
    assert code == EXIT_OK
    assert run("recover", "--input", encoded, "--output", recovered) == EXIT_OK
    assert recovered.read_bytes() == path_dataset.read_bytes()


def test_spectral_only_dataset_is_not_recoverable(tmp_path, path_dataset, capsys):
    rewired, encoded = tmp_path / "rw.jsonl", tmp_path / "lp.jsonl"
    run("rewire", "--input", path_dataset, "--output", rewired, "--r", 2)
    run("encode", "--input", rewired, "--output", encoded, "--pe", "lp", "--drop-provenance")
    assert run("recover", "--input", encoded, "--output", tmp_path / "rec.jsonl") == EXIT_DATA
    assert "not recoverable" in capsys.readouterr().err


def test_recover_empty_dataset(tmp_path):
    source = tmp_path / "empty.jsonl"
    source.write_text("")
    out = tmp_path / "out.jsonl"
    assert run("recover", "--input", source, "--output", out) == EXIT_OK
    assert out.read_text() == ""


def test_stats_table(path5, k3):
    table = stats_table([path5], r_max=4)
    assert table["mean_density"].round(4).tolist() == [0.32, 0.56, 0.72, 0.8]
    assert table["fully_connected"].tolist() == [0.0, 0.0, 0.0, 1.0]
    assert stats_table([k3], r_max=2)["fully_connected"].tolist() == [1.0, 1.0]


def test_stats_command(path_dataset, capsys):
    assert run("stats", "--input", path_dataset, "--r-max", 2) == EXIT_OK
    out = capsys.readouterr().out
    assert "mean_density" in out
    assert "0.5600" in out


def test_suggest_r():
    assert suggest_r([gen_path(5)])[0] == 2
    assert suggest_r([gen_complete(4)])[0] == 1
    r, curve, exceeded = suggest_r([gen_path(2)])
    assert (r, exceeded) == (1, False)
    assert curve == [(1, 0.5)]
    with pytest.raises(GraphValidationError, match="edgeless"):
        suggest_r([AttributedGraph(num_nodes=3, edges=[])])


def test_suggest_r_command(path_dataset, tmp_path, capsys):
    assert run("suggest-r", "--input", path_dataset) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1] == "2"

    pair = tmp_path / "pair.jsonl"
    run("generate", "path", "--n", 2, "--output", pair)
    capsys.readouterr()
    assert run("suggest-r", "--input", pair) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out.splitlines()[-1] == "1"
    assert "never exceeds" in captured.err


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        run("frobnicate")
    assert info.value.code == EXIT_USAGE


def test_config_file_supplies_defaults(tmp_path, path_dataset, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"r": 2, "ce-const": [0.0]}))
    out = tmp_path / "out.jsonl"
    assert run("--config", config, "rewire", "--input", path_dataset, "--output", out) == 0
    assert "-> 0.5600" in capsys.readouterr().out
    assert parse_config(
        ["--config", str(config), "rewire", "--input", "a", "--output", "b", "--r", "3"]
    ).r == 3


def test_invalid_config_file(tmp_path, path_dataset):
    config = tmp_path / "config.json"
    config.write_text("[1, 2]")
    code = run("--config", config, "rewire", "--input", path_dataset, "--output", "x.jsonl")
    assert code == EXIT_USAGE


def test_list_flags():
    config = parse_config(["train-toy", "neighborsmatch", "--r", "1,2", "--rp", "1..4"])
    assert config.r_grid == [1, 2]
    assert config.rp_grid == [1, 2, 3, 4]


def test_train_toy_on_a_dataset(tmp_path, capsys):
    source, rewired, encoded = (tmp_path / f"{name}.jsonl" for name in ("nm", "rw", "pe"))
    history = tmp_path / "history.jsonl"
    run("generate", "neighborsmatch", "--depth", 1, "--num", 4, "--output", source)
    run("rewire", "--input", source, "--output", rewired, "--r", 1)
    run("encode", "--input", rewired, "--output", encoded, "--pe", "adj")
    flags = "--readout root --hidden-dim 8 --heads 2 --layers 2 --max-epochs 2".split()
    code = run("train-toy", "dataset", "--input", encoded, *flags, "--history", history)
    assert code == EXIT_OK
    assert len(history.read_text().splitlines()) == 2
    assert "trained 2 epochs" in capsys.readouterr().out


def test_train_toy_experiment_table(tmp_path):
    out = tmp_path / "table.csv"
    flags = "--r 1 --rp 1 --num-graphs 4 --hidden-dim 8 --heads 2 --max-epochs 1".split()
    code = run("train-toy", "neighborsmatch", *flags, "--output", out)
    assert code == EXIT_OK
    assert out.read_text().splitlines()[0] == "r,r_p,cls,accuracy,accuracy_std,epochs"
