import math

import numpy as np
import pytest

from tankbench import training
from tankbench.bench import scenario_split, get_profile
from tankbench.checks import _constant_model, check_protocol, tiny_split
from tankbench.checkpoint import Checkpoint
from tankbench.models import ModelConfig, build_model
from tankbench.tensor import Parameter
from tankbench.training import (
    Adam, AdamState, EpochProtocol, TrainConfig, TrainingDiverged, TrainReport, adam_step,
    evaluate_mse, fine_tune, grid_search, train,
)


@pytest.fixture(scope="module")
def split():
    return tiny_split()


def mlp(seed=0, hidden=(8,)):
    return build_model(ModelConfig("MLP", mlp_hidden=hidden), seed)


# -- Adam -------------------------------------------------------------------------

def test_adam_zero_grad_leaves_params():
    p = np.array([1.0, -2.0])
    st = AdamState.zeros([p])
    adam_step([p], [np.zeros(2)], st, lr=0.1)
    assert np.array_equal(p, [1.0, -2.0]) and st.t == 1
    adam_step([p], [None], st, lr=0.1)
    assert np.array_equal(p, [1.0, -2.0]) and st.t == 2


def test_adam_first_step_magnitude_is_lr():
    rng = np.random.default_rng(0)
    p = rng.standard_normal(50)
    g = rng.standard_normal(50) * 10 ** rng.uniform(-3, 3, 50)
    before = p.copy()
    adam_step([p], [g], AdamState.zeros([p]), lr=1e-3)
    delta = np.abs(p - before)
    assert np.all(delta <= 1e-3 * (1 + 1e-6))
    assert np.allclose(delta, 1e-3, rtol=1e-4)
    assert np.all(np.sign(before - p) == np.sign(g))


def test_adam_scalar_convergence():
    theta = Parameter(np.array([1.0]))
    opt = Adam([theta], lr=0.1)
    for _ in range(100):
        theta.grad = 2 * theta.data
        opt.step()
    assert abs(theta.data[0]) < 0.05


def test_adam_rejects_non_finite_gradient_by_name():
    p = Parameter(np.zeros(2), name="fc0.weight")
    p.grad = np.array([1.0, np.nan])
    with pytest.raises(FloatingPointError, match="fc0.weight"):
        Adam([p], lr=0.1).step()


# -- epoch protocol ------------------------------------------------------------------

def test_protocol_constant_loss_stops_at_patience_plus_one():
    proto = EpochProtocol(1e-3, early_stop_patience=50)
    n = 0
    while not proto.stop:
        n += 1
        proto.update(n, 2.0)
    assert n == 51 and proto.best_epoch == 1


def test_lr_trace_halves_each_patience_window():
    proto = EpochProtocol(0.01, early_stop_patience=10_000, lr_halve_patience=25)
    proto.update(1, 1.0)
    trace = []
    for e in range(2, 103):
        proto.update(e, 1.0)
        trace.append(proto.lr)
    assert trace[23] == 0.01 and trace[24] == 0.005 and trace[49] == 0.0025
    assert all(math.log2(0.01 / lr) == int(math.log2(0.01 / lr)) for lr in trace)


def test_improvement_resets_counters():
    proto = EpochProtocol(1.0, early_stop_patience=3, lr_halve_patience=2)
    for e, v in enumerate([5, 5, 5, 4, 4, 4], start=1):
        proto.update(e, v)
    assert proto.lr == 0.25 and proto.best_epoch == 4
    assert proto.stop is False
    proto.update(7, 4)
    assert proto.stop is True


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(early_stop_patience=0)
    with pytest.raises(ValueError):
        TrainConfig(fine_tune=True, max_epochs=51)


# -- train ---------------------------------------------------------------------

def test_constant_model_stops_after_patience_plus_one(split):
    _, rep = train(_constant_model(), split, TrainConfig(max_epochs=200))
    assert len(rep.epochs) == 51 and rep.stopped_early
    assert len(set(rep.val_mse)) == 1


def test_checkpoint_holds_best_val(split):
    m = mlp()
    ck, rep = train(m, split, TrainConfig(max_epochs=8, learning_rate=1e-2))
    assert rep.best_val_mse == min(rep.val_mse)
    assert rep.epochs[rep.val_mse.index(rep.best_val_mse)] == rep.best_epoch
    restored = ck.to_model()
    vx, vy = split.arrays("val")
    assert evaluate_mse(restored, vx, vy) == rep.best_val_mse
    assert ck.meta["best_epoch"] == rep.best_epoch


def test_training_is_deterministic(split):
    _, a = train(mlp(1), split, TrainConfig(max_epochs=4, seed=3))
    _, b = train(mlp(1), split, TrainConfig(max_epochs=4, seed=3))
    assert a.train_mse == b.train_mse and a.val_mse == b.val_mse


def test_training_reduces_loss(split):
    _, rep = train(mlp(hidden=(32,)), split, TrainConfig(max_epochs=30, learning_rate=1e-2))
    assert rep.best_val_mse < 0.5 * rep.val_mse[0]


def test_divergence_aborts_with_trace(split):
    with np.errstate(all="ignore"):
        with pytest.raises(TrainingDiverged) as exc:
            train(mlp(), split, TrainConfig(max_epochs=50, learning_rate=1e300))
    assert exc.value.report is not None


def test_report_csv(tmp_path, split):
    _, rep = train(mlp(), split, TrainConfig(max_epochs=2))
    rep.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_mse,val_mse,lr" and len(lines) == 3
    rep.to_toml(tmp_path / "s.toml")
    assert "best_val_mse" in (tmp_path / "s.toml").read_text()


def test_empty_validation_rejected(split):
    from tankbench.dataset import DatasetSplit
    with pytest.raises(ValueError):
        train(mlp(), DatasetSplit(split.train, [], split.test), TrainConfig(max_epochs=1))


# -- fine-tuning ------------------------------------------------------------------

def test_zero_epoch_fine_tune_returns_input(split):
    m = mlp()
    train(m, split, TrainConfig(max_epochs=2))
    before = m.state()
    ck, rep = fine_tune(Checkpoint.from_model(m), split, TrainConfig().for_fine_tuning(0))
    assert rep.epochs == [0]
    assert all(np.array_equal(before[k], v) for k, v in ck.params.items())
    assert rep.final_test_mse == rep.epoch0_test_mse


def test_fine_tune_never_worse_than_epoch0(split):
    m = mlp()
    train(m, split, TrainConfig(max_epochs=3))
    _, rep = fine_tune(m, split, TrainConfig(learning_rate=0.05).for_fine_tuning(10))
    assert rep.best_val_mse <= rep.epoch0_val_mse
    assert rep.val_mse[0] == rep.epoch0_val_mse


def test_fine_tune_is_capped(split):
    m = mlp()
    train(m, split, TrainConfig(max_epochs=1))
    _, rep = fine_tune(m, split, TrainConfig(max_epochs=1000, early_stop_patience=10_000,
                                             lr_halve_patience=10_000))
    assert max(rep.epochs) == 50


def test_fine_tune_keeps_scaler(split):
    m = mlp()
    train(m, split, TrainConfig(max_epochs=1))
    mean = m.mean.copy()
    other = tiny_split(seed=5)
    fine_tune(m, other, TrainConfig().for_fine_tuning(1))
    assert np.array_equal(m.mean, mean)


def test_mlp_adapts_to_merged_phases():
    prof = get_profile("smoke")
    base = scenario_split("std", 0, prof)
    s5 = scenario_split("s5", 0, prof)
    m = mlp(hidden=(32,))
    train(m, base, TrainConfig(max_epochs=20, learning_rate=3e-3))
    _, rep = fine_tune(m, s5, TrainConfig(learning_rate=3e-3).for_fine_tuning(20))
    assert rep.final_test_mse < rep.epoch0_test_mse


# -- grid search -------------------------------------------------------------------

def test_grid_search_singleton(split):
    best, res = grid_search("MLP", [{"mlp_hidden": (4,)}], split, budget_epochs=1)
    assert best.mlp_hidden == (4,) and len(res) == 1


def test_grid_search_sabotaged_point_loses(split):
    grid = [{"learning_rate": 1e3, "mlp_hidden": (8,)}, {"learning_rate": 3e-3, "mlp_hidden": (6,)}]
    best, res = grid_search("MLP", grid, split, budget_epochs=5)
    assert best.mlp_hidden == (6,)


def test_grid_search_tie_goes_to_fewer_params(split, monkeypatch):
    def fake_train(model, split, config):
        r = TrainReport()
        r.best_val_mse = 1.0
        return None, r

    monkeypatch.setattr(training, "train", fake_train)
    best, _ = grid_search("MLP", [{"mlp_hidden": (9,)}, {"mlp_hidden": (3,)}, {"mlp_hidden": (5,)}],
                          split, budget_epochs=1)
    assert best.mlp_hidden == (3,)


def test_grid_search_errors(split):
    with pytest.raises(ValueError):
        grid_search("MLP", [], split)
    with pytest.raises(ValueError):
        grid_search("MLP", [{"bogus": 1}], split)


def test_protocol_suite():
    res = check_protocol()
    assert res.passed, res.detail
