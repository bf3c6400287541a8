"""Training, fine-tuning and grid search.

Protocol: Adam on minibatch MSE, validation MSE after every epoch, learning
rate halved after ``lr_halve_patience`` epochs without improvement, early
stop after ``early_stop_patience`` epochs without improvement, and the
checkpoint of the best validation epoch is returned.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli_w

from . import tensor as T
from .checkpoint import Checkpoint
from .dataset import DatasetSplit, Sample, stack
from .models import Forecaster, ModelConfig, build_model

log = logging.getLogger(__name__)

FINE_TUNE_EPOCHS = 50


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, report: "TrainReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 1000
    early_stop_patience: int = 50
    lr_halve_patience: int = 25
    seed: int = 0
    fine_tune: bool = False
    min_delta: float = 1e-9

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("learning_rate and batch_size must be positive, max_epochs >= 0")
        if self.early_stop_patience < 1 or self.lr_halve_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.fine_tune and self.max_epochs > FINE_TUNE_EPOCHS:
            raise ValueError(f"fine-tuning is capped at {FINE_TUNE_EPOCHS} epochs")

    def for_fine_tuning(self, epochs: int = FINE_TUNE_EPOCHS) -> "TrainConfig":
        return dataclasses.replace(self, fine_tune=True, max_epochs=epochs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- optimizer ------------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray | None], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              names: Sequence[str] | None = None) -> None:
    """In-place Adam update with bias correction. ``None`` grads count as zero."""
    for i, g in enumerate(grads):
        if g is not None and not np.all(np.isfinite(g)):
            name = names[i] if names else f"#{i}"
            raise FloatingPointError(f"non-finite gradient in parameter {name} "
                                     f"(max |g| = {np.nanmax(np.abs(g))})")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


class Adam:
    def __init__(self, params: Sequence[T.Parameter], lr: float):
        self.params = list(params)
        self.lr = lr
        self.state = AdamState.zeros([p.data for p in self.params])

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        adam_step([p.data for p in self.params], [p.grad for p in self.params], self.state,
                  self.lr, names=[p.name for p in self.params])


# -- epoch bookkeeping ----------------------------------------------------------

class EpochProtocol:
    """Best-so-far tracking, learning-rate halving and early stopping.

    Feed one validation loss per epoch to :meth:`update`; ``lr`` is the rate
    to use for the next epoch and ``stop`` says whether to end training.
    """

    def __init__(self, lr: float, early_stop_patience: int = 50, lr_halve_patience: int = 25,
                 min_delta: float = 1e-9):
        self.lr = lr
        self.early_stop_patience = early_stop_patience
        self.lr_halve_patience = lr_halve_patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = -1
        self.since_improve = 0
        self.since_lr_change = 0
        self.stop = False

    def update(self, epoch: int, val: float) -> bool:
        improved = val < self.best - self.min_delta
        if improved:
            self.best, self.best_epoch = val, epoch
            self.since_improve = 0
            self.since_lr_change = 0
        else:
            self.since_improve += 1
            self.since_lr_change += 1
            if self.since_lr_change >= self.lr_halve_patience:
                self.lr *= 0.5
                self.since_lr_change = 0
        self.stop = self.since_improve >= self.early_stop_patience
        return improved


@dataclass
class TrainReport:
    epochs: list[int] = field(default_factory=list)
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mse: float = math.inf
    wall_time: float = 0.0
    stopped_early: bool = False
    epoch0_val_mse: float | None = None
    epoch0_test_mse: float | None = None
    final_test_mse: float | None = None

    def record(self, epoch: int, train: float, val: float, lr: float) -> None:
        self.epochs.append(epoch)
        self.train_mse.append(train)
        self.val_mse.append(val)
        self.lr.append(lr)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_mse", "val_mse", "lr"])
            for row in zip(self.epochs, self.train_mse, self.val_mse, self.lr):
                w.writerow([row[0], *(repr(float(v)) for v in row[1:])])

    def summary(self) -> dict:
        d = {
            "best_epoch": self.best_epoch,
            "best_val_mse": self.best_val_mse,
            "epochs_run": max(self.epochs, default=0),
            "stopped_early": self.stopped_early,
            "wall_time_s": self.wall_time,
        }
        for k in ("epoch0_val_mse", "epoch0_test_mse", "final_test_mse"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d

    def to_toml(self, path: str | Path) -> None:
        Path(path).write_text(tomli_w.dumps(self.summary()))


# -- evaluation ---------------------------------------------------------------

def evaluate_mse(model: Forecaster, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of the per-sample forecast MSE, in raw level units."""
    if len(inputs) == 0:
        raise ValueError("cannot evaluate on an empty set")
    pred = model.predict(inputs)
    return float(np.mean((pred - targets) ** 2))


# -- training loop ------------------------------------------------------------

def _run(model: Forecaster, train_x: np.ndarray, train_y: np.ndarray, val_x: np.ndarray,
         val_y: np.ndarray, config: TrainConfig, epoch0: bool) -> tuple[Checkpoint, TrainReport]:
    if len(val_x) == 0:
        raise ValueError("validation set is empty")
    t0 = time.perf_counter()
    report = TrainReport()
    proto = EpochProtocol(config.learning_rate, config.early_stop_patience,
                          config.lr_halve_patience, config.min_delta)
    opt = Adam(model.params.values(), config.learning_rate)
    rng = np.random.default_rng(config.seed)
    xs, ys = model.standardize(train_x), model.standardize(train_y)
    best_state = model.state()

    if epoch0:
        val = evaluate_mse(model, val_x, val_y)
        report.epoch0_val_mse = val
        report.record(0, math.nan, val, proto.lr)
        proto.update(0, val)

    for epoch in range(1, config.max_epochs + 1):
        lr = proto.lr
        opt.lr = lr
        perm = rng.permutation(len(xs))
        losses = []
        for i in range(0, len(perm), config.batch_size):
            idx = perm[i:i + config.batch_size]
            opt.zero_grad()
            loss, _ = model.loss(xs[idx], ys[idx])
            loss.backward()
            try:
                opt.step()
            except FloatingPointError as e:
                raise TrainingDiverged(f"epoch {epoch}: {e}", report) from e
            losses.append(loss.item())
        val = evaluate_mse(model, val_x, val_y)
        report.record(epoch, float(np.mean(losses)) if losses else math.nan, val, lr)
        if not math.isfinite(val):
            report.wall_time = time.perf_counter() - t0
            trace = ", ".join(f"{e}:{v:.4g}" for e, v in zip(report.epochs, report.val_mse))
            raise TrainingDiverged(f"validation loss became {val} at epoch {epoch}; trace {trace}", report)
        if proto.update(epoch, val):
            best_state = model.state()
        log.debug("epoch %d train %.5g val %.5g lr %.3g", epoch, report.train_mse[-1], val, lr)
        if proto.stop:
            report.stopped_early = True
            break

    model.load_state(best_state)
    report.best_epoch = proto.best_epoch
    report.best_val_mse = proto.best
    report.wall_time = time.perf_counter() - t0
    return Checkpoint.from_model(model, {"best_epoch": proto.best_epoch}), report


def train(model: Forecaster, split: DatasetSplit, config: TrainConfig = TrainConfig(),
          train_samples: Sequence[Sample] | None = None) -> tuple[Checkpoint, TrainReport]:
    """Train from the current weights; the scaler is fitted on the training inputs.

    ``train_samples`` replaces ``split.train`` (used for augmented data).
    On return the model holds the best-validation weights.
    """
    x, y = stack(train_samples if train_samples is not None else split.train)
    if not config.fine_tune:
        model.fit_scaler(x)
    vx, vy = split.arrays("val")
    return _run(model, x, y, vx, vy, config, epoch0=config.fine_tune)


def fine_tune(checkpoint: Checkpoint | Forecaster, new_split: DatasetSplit,
              config: TrainConfig = TrainConfig(),
              train_samples: Sequence[Sample] | None = None) -> tuple[Checkpoint, TrainReport]:
    """Continue training all weights on ``new_split`` for at most 50 epochs.

    Epoch 0 (the incoming weights) is a selection candidate, so the returned
    checkpoint never has a worse validation MSE than the input. The scaler
    stays frozen. Test MSE before and after is recorded when the split has
    test samples.
    """
    model = checkpoint.to_model() if isinstance(checkpoint, Checkpoint) else checkpoint
    if not config.fine_tune:
        config = config.for_fine_tuning(min(config.max_epochs, FINE_TUNE_EPOCHS))
    tx, ty = new_split.arrays("test")
    epoch0_test = evaluate_mse(model, tx, ty) if len(tx) else None
    x, y = stack(train_samples if train_samples is not None else new_split.train)
    vx, vy = new_split.arrays("val")
    ckpt, report = _run(model, x, y, vx, vy, config, epoch0=True)
    report.epoch0_test_mse = epoch0_test
    if len(tx):
        report.final_test_mse = evaluate_mse(model, tx, ty)
    return ckpt, report


def grid_search(kind: str, grid: Sequence[dict], split: DatasetSplit,
                base: ModelConfig | None = None, train_config: TrainConfig = TrainConfig(),
                budget_epochs: int = 100, seed: int = 0) -> tuple[ModelConfig, list[dict]]:
    """Train every grid point for ``budget_epochs`` and keep the lowest best-val MSE.

    A grid point mixes :class:`ModelConfig` and :class:`TrainConfig` fields.
    Ties go to the smaller parameter count; diverged runs score ``inf``.
    """
    if not grid:
        raise ValueError("grid is empty")
    base = base or ModelConfig(kind=kind)
    model_fields = {f.name for f in dataclasses.fields(ModelConfig)}
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    results = []
    for point in grid:
        unknown = set(point) - model_fields - train_fields
        if unknown:
            raise ValueError(f"unknown grid keys {sorted(unknown)}")
        mcfg = dataclasses.replace(base, kind=kind, **{k: v for k, v in point.items() if k in model_fields})
        tcfg = dataclasses.replace(train_config, max_epochs=budget_epochs, seed=seed,
                                   **{k: v for k, v in point.items() if k in train_fields})
        model = build_model(mcfg, seed)
        try:
            with np.errstate(all="ignore"):
                _, rep = train(model, split, tcfg)
            score = rep.best_val_mse
        except TrainingDiverged:
            score = math.inf
        results.append({"point": dict(point), "config": mcfg, "best_val_mse": score,
                        "params": model.parameter_count()})
    best = min(results, key=lambda r: (r["best_val_mse"], r["params"]))
    return best["config"], results
