# Standard imports
import itertools
import json

# Third party imports
import numpy as np
import pytest
from pydantic import ValidationError

# Internal imports
from src.hoprewire.errors import ConfigError, TrainingDivergedError
from src.hoprewire.toy_gnn.model import ToyModel, infer_model_config
from src.hoprewire.toy_gnn.train import PlateauScheduler, TrainConfig, evaluate, train
from tests.test_model import encoded


def fixed_clock():
    return 0.0


def model_for(graphs, **overrides) -> ToyModel:
    fields = {"hidden_dim": 8, "heads": 2, "layers": 1, **overrides}
    return ToyModel(infer_model_config(graphs, **fields))


def test_scheduler_halves_after_patience():
    scheduler = PlateauScheduler(1e-3, patience=3, factor=0.5, stop_lr=1e-6)
    rates = []
    finished_at = None
    for step in range(1, 40):
        rates.append(scheduler.step(1.0))
        if scheduler.finished and finished_at is None:
            finished_at = step
    assert rates[:7] == [1e-3, 1e-3, 1e-3, 5e-4, 5e-4, 5e-4, 2.5e-4]
    assert finished_at == 31


def test_scheduler_resets_on_strict_improvement():
    scheduler = PlateauScheduler(1.0, patience=2)
    for loss in (5.0, 5.0, 4.0, 4.0):
        scheduler.step(loss)
    assert scheduler.lr == 1.0
    assert scheduler.bad_epochs == 1
    assert scheduler.best == 4.0


def test_stop_rate_must_be_below_initial_rate():
    with pytest.raises(ValidationError):
        TrainConfig(initial_lr=1e-3, stop_lr=1e-2)


def test_empty_split_is_a_config_error():
    graphs = encoded("short")
    with pytest.raises(ConfigError, match="training split is empty"):
        train(model_for(graphs), [], TrainConfig())
    with pytest.raises(ConfigError, match="validation split is empty"):
        train(model_for(graphs), graphs, TrainConfig(), val_set=[])


def test_single_sample_is_memorized():
    graphs = encoded("short", count=1)
    model = model_for(graphs, out_dim=3)
    tc = TrainConfig(initial_lr=1e-2, patience=50, max_epochs=400)
    result = train(model, graphs, tc, clock=fixed_clock)
    assert result.history[-1].train_loss < 1e-3
    assert result.final_accuracy == 1.0


def test_training_is_deterministic(tmp_path):
    graphs = encoded("lp", count=4)
    tc = TrainConfig(max_epochs=5, batch_size=2, seed=3)
    first = train(model_for(graphs), graphs, tc, history_path=tmp_path / "a.jsonl")
    second = train(model_for(graphs), graphs, tc, history_path=tmp_path / "b.jsonl")
    assert first.history == second.history
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    for name, value in first.model.state_dict().items():
        np.testing.assert_array_equal(value, second.model.state_dict()[name])


def test_history_file(tmp_path):
    graphs = encoded("adj", count=3)
    path = tmp_path / "history.jsonl"
    result = train(model_for(graphs), graphs, TrainConfig(max_epochs=3), history_path=path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert [line["epoch"] for line in lines] == [1, 2, 3]
    assert set(lines[0]) == {"epoch", "train_loss", "val_loss", "train_acc", "val_acc", "lr"}
    assert result.stop_reason == "max_epochs"


def test_wall_clock_cap():
    ticks = itertools.count()
    graphs = encoded("none", count=2)
    tc = TrainConfig(max_minutes=2, max_epochs=50)
    result = train(model_for(graphs), graphs, tc, clock=lambda: next(ticks) * 60.0)
    assert result.stop_reason == "max_minutes"
    assert len(result.history) == 2


def test_target_accuracy_stops_early():
    graphs = encoded("short", count=1)
    tc = TrainConfig(initial_lr=1e-2, max_epochs=400, target_accuracy=1.0)
    result = train(model_for(graphs, out_dim=3), graphs, tc, clock=fixed_clock)
    assert result.stop_reason == "target_accuracy"
    assert result.epochs_to(1.0) == len(result.history)


def test_stop_rate_ends_training(monkeypatch):
    graphs = encoded("none", count=2)
    model = model_for(graphs)
    backward = model.backward

    def frozen(batch):
        loss, grads = backward(batch)
        return loss, {name: np.zeros_like(grad) for name, grad in grads.items()}

    monkeypatch.setattr(model, "backward", frozen)
    tc = TrainConfig(initial_lr=1e-3, stop_lr=6e-4, patience=1, max_epochs=500)
    result = train(model, graphs, tc, clock=fixed_clock)
    assert result.stop_reason == "stop_lr"
    assert len(result.history) == 2
    assert [record.lr for record in result.history] == [1e-3, 1e-3]


def test_divergence_keeps_partial_history():
    graphs = encoded("none", count=2)
    model = model_for(graphs)
    model.params["readout.1.bias"].data = np.full(model.config.out_dim, np.inf)
    with pytest.raises(TrainingDivergedError) as info:
        train(model, graphs, TrainConfig(max_epochs=3), clock=fixed_clock)
    assert info.value.history == []


def test_evaluate_reports_loss_and_accuracy():
    graphs = encoded("adj", count=3)
    loss, accuracy = evaluate(model_for(graphs), graphs, batch_size=2)
    assert loss > 0
    assert 0.0 <= accuracy <= 1.0


def test_divergence_writes_completed_epochs(tmp_path, monkeypatch):
    graphs = encoded("none", count=2)
    model = model_for(graphs)
    backward = model.backward
    calls = itertools.count(1)

    def blows_up_on_second_step(batch):
        loss, grads = backward(batch)
        return (float("nan") if next(calls) == 2 else loss), grads

    monkeypatch.setattr(model, "backward", blows_up_on_second_step)
    path = tmp_path / "history.jsonl"
    with pytest.raises(TrainingDivergedError, match="epoch 2") as info:
        train(model, graphs, TrainConfig(max_epochs=5), history_path=path, clock=fixed_clock)
    assert [record.epoch for record in info.value.history] == [1]
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [row["epoch"] for row in rows] == [1]
