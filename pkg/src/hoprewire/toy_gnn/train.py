"""
Mini-batch training of a ToyModel with Adam and a plateau learning-rate schedule.

The learning rate starts at ``initial_lr`` and is halved whenever the validation loss has not
improved for ``patience`` epochs. Training stops once the rate falls below ``stop_lr``, after
``max_epochs``, when the wall-clock cap is reached, or (optionally) as soon as the training
accuracy reaches ``target_accuracy``.
"""

# Standard imports
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

# Third party imports
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Internal imports
from config.settings import settings
from src.hoprewire.dataset_io import write_atomic
from src.hoprewire.encode import flip_spectral_signs
from src.hoprewire.errors import ConfigError, NonFiniteError, TrainingDivergedError
from src.hoprewire.rewire import RewiredGraph
from src.hoprewire.toy_gnn.batching import collate
from src.hoprewire.toy_gnn.model import ToyModel


class TrainConfig(BaseModel):
    """Optimization settings.

    Attributes:
        initial_lr: Starting Adam learning rate
        patience: Non-improving validation epochs before the rate is halved
        factor: Multiplier applied to the rate on a plateau
        stop_lr: Training stops once the rate drops below this value
        max_minutes: Wall-clock cap of one run
        max_epochs: Epoch cap of one run
        batch_size: Graphs per optimizer step
        seed: Seed of the shuffling and sign-flip stream
        target_accuracy: Stop once the training accuracy reaches this value
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    initial_lr: float = Field(default_factory=lambda: settings.default_initial_lr, gt=0)
    patience: int = Field(default_factory=lambda: settings.default_patience, ge=1)
    factor: float = Field(default=0.5, gt=0, lt=1)
    stop_lr: float = Field(default_factory=lambda: settings.default_stop_lr, gt=0)
    max_minutes: float = Field(default_factory=lambda: settings.default_max_minutes, gt=0)
    max_epochs: int = Field(default=1000, ge=1)
    batch_size: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0)
    target_accuracy: float | None = Field(default=None, gt=0, le=1)

    @model_validator(mode="after")
    def _check_rates(self) -> "TrainConfig":
        if self.stop_lr >= self.initial_lr:
            raise ValueError(f"stop_lr {self.stop_lr} must be below initial_lr {self.initial_lr}")
        return self


class EpochRecord(BaseModel):
    """One row of the training history."""

    epoch: int
    train_loss: float
    val_loss: float
    train_acc: float
    val_acc: float
    lr: float


@dataclass
class TrainResult:
    """Trained model, per-epoch history and the reason training ended."""

    model: ToyModel
    history: list[EpochRecord]
    stop_reason: str

    @property
    def final_accuracy(self) -> float:
        return self.history[-1].train_acc if self.history else float("nan")

    def epochs_to(self, accuracy: float) -> int | None:
        """First epoch whose training accuracy reaches ``accuracy``."""
        for record in self.history:
            if record.train_acc >= accuracy:
                return record.epoch
        return None


class Adam:
    """Adam optimizer over a ToyModel's parameters."""

    def __init__(
        self, model: ToyModel, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ):
        self.model = model
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self._m = {name: np.zeros_like(p.data) for name, p in model.params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in model.params.items()}

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps
        for name, grad in grads.items():
            m = self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * grad
            v = self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * grad**2
            param = self.model.params[name]
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data = param.data - lr * update


class PlateauScheduler:
    """Halve the learning rate after ``patience`` epochs without a strictly lower loss."""

    def __init__(
        self, initial_lr: float, patience: int, factor: float = 0.5, stop_lr: float = 1e-6
    ):
        self.lr = initial_lr
        self.patience = patience
        self.factor = factor
        self.stop_lr = stop_lr
        self.best = math.inf
        self.bad_epochs = 0

    @property
    def finished(self) -> bool:
        return self.lr < self.stop_lr

    def step(self, loss: float) -> float:
        """Record one epoch's validation loss and return the learning rate for the next."""
        if loss < self.best:
            self.best = loss
            self.bad_epochs = 0
            return self.lr
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.lr *= self.factor
            self.bad_epochs = 0
            logger.debug(f"Validation loss plateaued, learning rate -> {self.lr:.3e}")
        return self.lr


def _batches(items: Sequence[RewiredGraph], order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        yield [items[i] for i in order[start : start + size]]


def evaluate(
    model: ToyModel, graphs: Sequence[RewiredGraph], batch_size: int = 32
) -> tuple[float, float]:
    """Mean loss and accuracy of ``model`` on ``graphs`` (no gradient bookkeeping kept)."""
    weighted_loss = 0.0
    correct = 0.0
    total = 0
    for chunk in _batches(graphs, np.arange(len(graphs)), batch_size):
        batch = collate(chunk, pe_kind=model.config.pe_kind)
        output = model.forward(batch).output
        if model.config.task == "per-node-multiclass":
            count = int(np.sum(batch.node_labels >= 0))  # type: ignore[operator]
        else:
            count = batch.num_graphs
        if count == 0:
            continue
        weighted_loss += float(model.loss(output, batch).data) * count
        correct += model.accuracy(output, batch) * count
        total += count
    if total == 0:
        return float("nan"), float("nan")
    return weighted_loss / total, correct / total


def write_history(history: Sequence[EpochRecord], path: str | Path) -> None:
    """Write the history as JSONL, one epoch per line."""
    write_atomic(path, [record.model_dump_json() for record in history])


def _diverged(
    message: str, history: list[EpochRecord], history_path: str | Path | None
) -> TrainingDivergedError:
    """Build the divergence error, saving the epochs completed so far."""
    if history_path is not None:
        write_history(history, history_path)
    return TrainingDivergedError(message, history)


def train(
    model: ToyModel,
    train_set: Sequence[RewiredGraph],
    tc: TrainConfig,
    val_set: Sequence[RewiredGraph] | None = None,
    history_path: str | Path | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> TrainResult:
    """Train ``model`` in place.

    Without a validation split the training loss drives the plateau schedule. Spectral
    encodings get a fresh random sign per eigenvector, sample and epoch.

    Raises:
        ConfigError: If the training split is empty
        TrainingDivergedError: If the loss or a gradient becomes non-finite; the completed
            epochs are written to ``history_path`` first
    """
    if not train_set:
        raise ConfigError("training split is empty")
    if val_set is not None and not val_set:
        raise ConfigError("validation split is empty")
    val_set = train_set if val_set is None else val_set

    rng = np.random.Generator(np.random.PCG64(tc.seed))
    optimizer = Adam(model)
    scheduler = PlateauScheduler(tc.initial_lr, tc.patience, tc.factor, tc.stop_lr)
    history: list[EpochRecord] = []
    started = clock()
    stop_reason = "max_epochs"
    flip = model.config.pe_kind == "lp"

    for epoch in range(1, tc.max_epochs + 1):
        lr = scheduler.lr
        for chunk in _batches(train_set, rng.permutation(len(train_set)), tc.batch_size):
            if flip:
                chunk = [flip_spectral_signs(g, rng) for g in chunk]
            try:
                loss, grads = model.backward(chunk)
            except NonFiniteError as exc:
                message = f"training diverged at epoch {epoch}: {exc}"
                raise _diverged(message, history, history_path) from exc
            if not math.isfinite(loss):
                raise _diverged(f"non-finite loss at epoch {epoch}", history, history_path)
            optimizer.step(grads, lr)

        train_loss, train_acc = evaluate(model, train_set, tc.batch_size)
        if val_set is train_set:
            val_loss, val_acc = train_loss, train_acc
        else:
            val_loss, val_acc = evaluate(model, val_set, tc.batch_size)
        if not math.isfinite(train_loss):
            raise _diverged(f"non-finite loss at epoch {epoch}", history, history_path)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                train_acc=train_acc,
                val_acc=val_acc,
                lr=lr,
            )
        )
        logger.debug(
            f"Epoch {epoch}: train_loss={train_loss:.4f} train_acc={train_acc:.3f} "
            f"val_loss={val_loss:.4f} lr={lr:.2e}"
        )

        scheduler.step(val_loss)
        if tc.target_accuracy is not None and train_acc >= tc.target_accuracy:
            stop_reason = "target_accuracy"
            break
        if scheduler.finished:
            stop_reason = "stop_lr"
            break
        if (clock() - started) / 60.0 >= tc.max_minutes:
            stop_reason = "max_minutes"
            break

    logger.info(
        f"Training stopped after {len(history)} epochs ({stop_reason}), "
        f"train accuracy {history[-1].train_acc:.3f}"
    )
    if history_path is not None:
        write_history(history, history_path)
    return TrainResult(model=model, history=history, stop_reason=stop_reason)
