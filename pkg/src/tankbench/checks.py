"""Acceptance checks shared by ``tankbench check`` and the test suite.

Each check returns :class:`CheckResult` objects; experiment-level checks
read stored :class:`~tankbench.bench.EvalResult` records instead of training.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Parameter, Tensor

NOISE_FLOOR_FACTOR = 5.0
PERSISTENCE_MARGIN = 0.30
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as e:  # a crashing check is a failing check
        ok, detail = False, f"{type(e).__name__}: {e}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


# -- finite differences -------------------------------------------------------------

def numeric_grad(f: Callable[[], float], arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``arr``, perturbed in place."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + eps
        fp = f()
        arr[i] = old - eps
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # the floor keeps exactly-zero gradients (e.g. attention key biases) from
    # turning finite-difference rounding noise into a large relative error
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-6)
    return float(np.abs(analytic - numeric).max() / scale)


def gradcheck(build: Callable[[], Tensor], inputs: Sequence[Tensor], seed: int = 0) -> float:
    """Worst relative error over ``inputs`` for the scalar ``sum(build() * R)``, R random."""
    out = build()
    proj = np.random.default_rng(seed).standard_normal(out.shape)

    def scalar():
        return float((build().data * proj).sum())

    for t in inputs:
        t.grad = None
    T.tsum(T.mul(build(), Tensor(proj))).backward()
    worst = 0.0
    for t in inputs:
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        worst = max(worst, max_rel_error(g, numeric_grad(scalar, t.data)))
    return worst


def _rand(rng, *shape, low=None):
    a = rng.standard_normal(shape)
    if low is not None:
        a = np.sign(a) * (np.abs(a) + low)
    return Parameter(a)


def primitive_cases() -> dict[str, tuple[Callable[[], Tensor], list[Tensor]]]:
    """One small randomized graph per autodiff primitive."""
    rng = np.random.default_rng(42)
    a, b = _rand(rng, 2, 3, 4), _rand(rng, 2, 3, 4)
    bias = _rand(rng, 4)
    pos = Parameter(rng.uniform(0.5, 2.0, (3, 4)))
    m1, m2 = _rand(rng, 2, 3, 5), _rand(rng, 5, 4)
    bm = _rand(rng, 2, 5, 4)
    x_lin, w_lin, b_lin = _rand(rng, 2, 3, 5), _rand(rng, 5, 4), _rand(rng, 4)
    r = _rand(rng, 3, 4, low=0.1)
    ln_x, ln_g, ln_b = _rand(rng, 2, 3, 6), _rand(rng, 6), _rand(rng, 6)
    cx, cw, cb = _rand(rng, 2, 7, 3), _rand(rng, 3, 3, 4), _rand(rng, 4)
    gx, gh0, gwh, gbh = _rand(rng, 2, 5, 9), _rand(rng, 2, 3), _rand(rng, 3, 9), _rand(rng, 9)
    sm = _rand(rng, 2, 4, 4)
    mask = np.tril(np.ones((4, 4), dtype=bool))
    cat1, cat2 = _rand(rng, 2, 3), _rand(rng, 2, 5)
    mp, mt = _rand(rng, 3, 4), _rand(rng, 3, 4)
    return {
        "add_broadcast": (lambda: T.add(a, bias), [a, bias]),
        "sub": (lambda: T.sub(a, b), [a, b]),
        "mul": (lambda: T.mul(a, b), [a, b]),
        "mul_broadcast": (lambda: T.mul(a, bias), [a, bias]),
        "matmul_2d_weight": (lambda: T.matmul(m1, m2), [m1, m2]),
        "matmul_batched": (lambda: T.matmul(m1, bm), [m1, bm]),
        "transpose": (lambda: T.transpose(a, (2, 0, 1)), [a]),
        "reshape": (lambda: T.reshape(a, (6, 4)), [a]),
        "concat": (lambda: T.concat([cat1, cat2], axis=1), [cat1, cat2]),
        "slice": (lambda: a[:, 1:, -1], [a]),
        "sum_axis": (lambda: T.tsum(a, axis=1), [a]),
        "mean_axis": (lambda: T.mean(a, axis=-1), [a]),
        "relu": (lambda: T.relu(r), [r]),
        "sigmoid": (lambda: T.sigmoid(a), [a]),
        "tanh": (lambda: T.tanh(a), [a]),
        "exp": (lambda: T.exp(a), [a]),
        "sqrt": (lambda: T.sqrt(pos), [pos]),
        "softmax": (lambda: T.softmax(sm, axis=-1), [sm]),
        "softmax_masked": (lambda: T.softmax(sm, axis=-1, mask=mask), [sm]),
        "layer_norm": (lambda: T.layer_norm(ln_x, ln_g, ln_b), [ln_x, ln_g, ln_b]),
        "causal_conv1d": (lambda: T.causal_conv1d(cx, cw, cb, dilation=2), [cx, cw, cb]),
        "linear": (lambda: T.linear(x_lin, w_lin, b_lin), [x_lin, w_lin, b_lin]),
        "gru_scan": (lambda: T.gru_scan(gx, gh0, gwh, gbh), [gx, gh0, gwh, gbh]),
        "mse_loss": (lambda: T.mse_loss(mp, mt), [mp, mt]),
    }


TOY_MODELS = {
    "MLP": {"mlp_hidden": (5, 4)},
    "GRU": {"gru_hidden": 3, "gru_layers": 2},
    "GRU_AR": {"gru_hidden": 3, "gru_layers": 2},
    "TCN": {"tcn_channels": 3, "tcn_blocks": 2, "tcn_convs_per_block": 2},
    "TCN_FAE": {"tcn_channels": 3, "tcn_blocks": 2, "tcn_convs_per_block": 1,
                "fae_latent": 2, "fae_hidden": 4},
    "Transformer": {"d_model": 4, "n_heads": 2, "enc_layers": 1, "dec_layers": 1, "ff_dim": 6},
    "Transformer_CE": {"d_model": 4, "n_heads": 2, "enc_layers": 1, "dec_layers": 1, "ff_dim": 6,
                       "ce_kernel": 2, "ce_layers": 2},
}


def toy_model(kind: str, seed: int = 0, input_len: int = 6, horizon: int = 3):
    from .models import ModelConfig, build_model
    return build_model(ModelConfig(kind=kind, input_len=input_len, horizon=horizon,
                                   **TOY_MODELS[kind]), seed)


def model_gradcheck(kind: str, seed: int = 0) -> float:
    """Worst relative error of the full training loss w.r.t. every parameter of a toy model."""
    model = toy_model(kind, seed)
    rng = np.random.default_rng(seed + 1)
    c = model.config
    x = rng.standard_normal((2, c.input_len, c.channels))
    y = rng.standard_normal((2, c.horizon, c.channels))

    def scalar():
        return model.loss(x, y)[0].item()

    params = list(model.params.values())
    for p in params:
        p.grad = None
    model.loss(x, y)[0].backward()
    worst = 0.0
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        worst = max(worst, max_rel_error(g, numeric_grad(scalar, p.data)))
    return worst


# -- 1. physics ---------------------------------------------------------------------

def check_physics() -> CheckResult:
    from .sim import ControlInput, TankState, _rhs, step

    def run():
        # closed system: no inflow, no outflow, levels stay well above zero
        closed = ControlInput(kv12=0.3, kv23=0.2)
        s = TankState(5.0, 2.0, 0.5)
        total0 = s.h1 + s.h2 + s.h3
        drift = 0.0
        for _ in range(1000):
            for _ in range(10):
                s = step(s, closed, 0.1)
            drift = max(drift, abs(s.h1 + s.h2 + s.h3 - total0))
        eq = TankState(1.7, 1.7, 1.7)
        fixed = all(step(eq, ControlInput(kv12=1.0, kv23=1.0), 0.1) == eq for _ in range(3))
        # mass balance against an independent fine integration of the outflow
        u = ControlInput(q1=0.1, q3=0.05, kv12=0.2, kv23=0.1, kv3=0.4)
        s = TankState(2.0, 1.0, 0.25)
        worst = 0.0
        for _ in range(20):
            nxt = s
            for _ in range(10):
                nxt = step(nxt, u, 0.1)
            h = [s.h1, s.h2, s.h3]
            out, n, dt = 0.0, 1000, 1e-3
            for _ in range(n):
                def f(v):
                    d = _rhs(*v, u.q1, u.q3, u.kv12, u.kv23, u.kv3)
                    return d, u.kv3 * math.sqrt(max(v[2], 0.0))
                k1, o1 = f(h)
                k2, o2 = f([h[i] + 0.5 * dt * k1[i] for i in range(3)])
                k3, o3 = f([h[i] + 0.5 * dt * k2[i] for i in range(3)])
                k4, o4 = f([h[i] + dt * k3[i] for i in range(3)])
                h = [h[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(3)]
                out += dt / 6 * (o1 + 2 * o2 + 2 * o3 + o4)
            expected = (u.q1 + u.q3) * 1.0 - out
            actual = (nxt.h1 + nxt.h2 + nxt.h3) - (s.h1 + s.h2 + s.h3)
            worst = max(worst, abs(actual - expected))
            s = nxt
        ok = drift < 1e-9 and fixed and worst < 1e-6
        return ok, f"closed drift {drift:.2e} (<1e-9), fixed point exact={fixed}, mass balance {worst:.2e} (<1e-6)"

    return _timed("1 physics", run)


# -- 2. integrator ------------------------------------------------------------------

def check_integrator() -> CheckResult:
    from .sim import ControlInput, TankState, step

    def rhs(h1, h2, h3):
        # written out independently of the simulator
        def flow(a, b, k):
            d = a - b
            return k * math.copysign(math.sqrt(abs(d)), d) if d != 0 else 0.0
        f12, f23 = flow(h1, h2, 0.2), flow(h2, h3, 0.1)
        return 0.1 - f12, f12 - f23, 0.05 + f23 - 0.4 * math.sqrt(h3)

    def run():
        u = ControlInput(q1=0.1, q3=0.05, kv12=0.2, kv23=0.1, kv3=0.4)
        s = TankState(2.0, 1.0, 0.25)
        h1, h2, h3 = 2.0, 1.0, 0.25
        dt, per = 1e-5, 10000
        worst = 0.0
        for _ in range(100):
            s = step(s, u, 0.1)
            for _ in range(per):
                d1, d2, d3 = rhs(h1, h2, h3)
                h1, h2, h3 = h1 + dt * d1, h2 + dt * d2, h3 + dt * d3
            worst = max(worst, abs(s.h1 - h1), abs(s.h2 - h2), abs(s.h3 - h3))
        return worst < 1e-6, f"max |RK4(0.1) - Euler(1e-5)| over 100 steps = {worst:.2e} (<1e-6)"

    return _timed("2 integrator accuracy", run)


# -- 3. gradients -------------------------------------------------------------------

def check_gradients() -> CheckResult:
    from .models import KINDS

    def run():
        errs = {n: gradcheck(b, i) for n, (b, i) in primitive_cases().items()}
        errs.update({k: model_gradcheck(k) for k in KINDS})
        name, worst = max(errs.items(), key=lambda kv: kv[1])
        bad = [n for n, e in errs.items() if not e < GRAD_TOL]
        return not bad, (f"{len(errs)} graphs, worst rel. error {worst:.1e} ({name})"
                         + (f"; failing {bad}" if bad else ""))

    return _timed("3 gradient suite", run)


# -- 4. causality -------------------------------------------------------------------

def tcn_receptive_field_probe() -> tuple[bool, str]:
    from .models import ModelConfig, build_model
    m = build_model(ModelConfig(kind="TCN", tcn_channels=4, tcn_kernel=3, tcn_blocks=3,
                                tcn_convs_per_block=1), 0)
    rf = m.encoder.receptive_field(3)
    x = np.random.default_rng(0).standard_normal((1, 250, 3))
    with T.no_grad():
        base = m.features(Tensor(x)).data[0, -1]
        inside = []
        for t in range(250):
            xp = x.copy()
            xp[0, t] += 1.0
            inside.append(not np.array_equal(m.features(Tensor(xp)).data[0, -1], base))
    first = 250 - rf
    ok = rf == 15 and not any(inside[:first]) and all(inside[first:])
    return ok, f"receptive field {rf}, steps reaching last features: {sum(inside)}"


def decoder_mask_probe() -> tuple[bool, str]:
    from .models import ModelConfig, build_model
    leaks = 0
    for kind in ("Transformer", "Transformer_CE"):
        m = build_model(ModelConfig(kind=kind, d_model=8, n_heads=2, enc_layers=1, dec_layers=2,
                                    ff_dim=8), 0)
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((1, 250, 3)))
        dec = rng.standard_normal((1, 50, 3))
        with T.no_grad():
            mem = m.encode(x)
            base = m.decode(mem, Tensor(dec)).data
            for t in range(0, 50, 7):
                dp = dec.copy()
                dp[0, t + 1:] += rng.standard_normal((49 - t, 3))
                out = m.decode(mem, Tensor(dp)).data
                leaks += int(not np.array_equal(out[0, :t + 1], base[0, :t + 1]))
    return leaks == 0, f"{leaks} future-leak violations"


def ce_embedding_probe() -> tuple[bool, str]:
    from .models import ModelConfig, build_model
    m = build_model(ModelConfig(kind="Transformer_CE", d_model=8, n_heads=2, enc_layers=1,
                                dec_layers=1, ff_dim=8, ce_kernel=3, ce_layers=2), 0)
    x = np.random.default_rng(2).standard_normal((1, 250, 3))
    leaks = 0
    with T.no_grad():
        base = m.embed(Tensor(x), "enc").data
        for t in (0, 1, 50, 248, 249):
            xp = x.copy()
            xp[0, t] += 1.0
            leaks += int(not np.array_equal(m.embed(Tensor(xp), "enc").data[0, :t], base[0, :t]))
    return leaks == 0, f"{leaks} past-embedding changes"


def check_causality() -> CheckResult:
    def run():
        parts = [tcn_receptive_field_probe(), decoder_mask_probe(), ce_embedding_probe()]
        return all(p[0] for p in parts), "; ".join(p[1] for p in parts)

    return _timed("4 causality suite", run)


# -- 5. protocol --------------------------------------------------------------------

def _constant_model(seed: int = 0):
    """MLP whose output is multiplied by zero, so every epoch has the same val loss."""
    from .models import MLPForecaster, ModelConfig

    class Constant(MLPForecaster):
        def forward(self, x, y=None, training=False):
            pred, _ = super().forward(x, y, training)
            return T.mul(pred, 0.0), None

    return Constant(ModelConfig(kind="MLP", mlp_hidden=(4,)), seed)


def tiny_split(seed: int = 0, counts=(16, 8, 8), length: int = 3000):
    from .dataset import make_splits
    from .sim import run_simulation, standard_config
    return make_splits(run_simulation(standard_config(seed), length), counts, seed=seed)


def check_protocol() -> CheckResult:
    from .training import EpochProtocol, TrainConfig, fine_tune, train

    def run():
        split = tiny_split()
        cfg = TrainConfig(max_epochs=200, early_stop_patience=50, lr_halve_patience=25)
        _, rep = train(_constant_model(), split, cfg)
        epochs = len(rep.epochs)
        early_ok = epochs == cfg.early_stop_patience + 1

        proto = EpochProtocol(1e-3, early_stop_patience=10_000, lr_halve_patience=25)
        trace = []
        for e in range(1, 201):
            trace.append(proto.lr)
            proto.update(e, 1.0)
        expected = [1e-3 * 2.0 ** -(max(e - 2, 0) // 25) for e in range(1, 201)]
        lr_ok = trace == expected

        from .models import ModelConfig, build_model
        m = build_model(ModelConfig(kind="MLP", mlp_hidden=(8,)), 0)
        train(m, split, TrainConfig(max_epochs=3))
        _, ft = fine_tune(m, split, TrainConfig(learning_rate=0.05).for_fine_tuning(10))
        sel_ok = ft.best_val_mse <= ft.epoch0_val_mse and ft.best_val_mse == min(ft.val_mse)
        return early_ok and lr_ok and sel_ok, (
            f"constant model stopped after {epochs} epochs (expect {cfg.early_stop_patience + 1}); "
            f"lr trace exact={lr_ok}; fine-tune best {ft.best_val_mse:.4g} <= epoch0 {ft.epoch0_val_mse:.4g}")

    return _timed("5 protocol suite", run)


# -- 6. augmentation -------------------------------------------------------------------

def check_augmentation() -> CheckResult:
    from .augment import augment_noise, augment_time_warp

    def run():
        split = tiny_split(counts=(20, 1, 1))
        rng = np.random.default_rng(0)
        ident = True
        bounded = True
        for s in split.train:
            n0 = augment_noise(s, 0.0, rng)
            w0 = augment_time_warp(s, 0.0, rng)
            ident &= np.array_equal(n0.input, s.input) and np.array_equal(n0.target, s.target)
            ident &= np.array_equal(w0.input, s.input) and np.array_equal(w0.target, s.target)
            full = np.concatenate([s.input, s.target])
            w = augment_time_warp(s, 5.0, rng)
            wf = np.concatenate([w.input, w.target])
            bounded &= bool(np.all(wf >= full.min(axis=0)) and np.all(wf <= full.max(axis=0)))
        return ident and bounded, f"sigma=0 identities exact={ident}; warped within channel range={bounded}"

    return _timed("6 augmentation identities", run)


def quick_checks() -> list[CheckResult]:
    return [check_physics(), check_integrator(), check_gradients(), check_causality(),
            check_protocol(), check_augmentation()]


# -- 7-10. experiment-level checks -------------------------------------------------------

def _median(results, **match) -> float:
    vals = [r.test_mse for r in results if all(getattr(r, k) == v for k, v in match.items())]
    return float(np.median(vals)) if vals else math.nan


def check_learning(results, wall_seconds: float | None = None, sigma: float = 0.02,
                   budget_seconds: float = 1200.0) -> CheckResult:
    """Every model beats persistence by the margin; MLP and GRU-AR near the noise floor."""
    from .bench import noise_floor
    from .models import KINDS

    def run():
        e1 = [r for r in results if r.experiment == 1 and r.scenario == "std"]
        pers = _median(e1, model="persistence")
        floor = noise_floor(sigma)
        msgs, ok = [], True
        for k in KINDS:
            m = _median(e1, model=k)
            good = m <= (1 - PERSISTENCE_MARGIN) * pers
            if k in ("MLP", "GRU_AR"):
                good &= m <= NOISE_FLOOR_FACTOR * floor
            ok &= good
            msgs.append(f"{k}={m:.3g}{'' if good else '(!)'}")
        detail = (f"persistence {pers:.3g}, bound {(1 - PERSISTENCE_MARGIN) * pers:.3g}, "
                  f"noise-floor bound {NOISE_FLOOR_FACTOR * floor:.3g}; " + ", ".join(msgs))
        if wall_seconds is not None:
            ok &= wall_seconds <= budget_seconds
            detail += f"; runtime {wall_seconds:.0f}s (<= {budget_seconds:.0f}s)"
        return ok, detail

    return _timed("7 learning sanity", run)


def check_robustness(results) -> CheckResult:
    from .models import KINDS

    def run():
        e1 = [r for r in results if r.experiment == 1]
        bad = []
        for k in KINDS:
            std, s1, s2 = (_median(e1, model=k, scenario=s) for s in ("std", "s1", "s2"))
            if not (s2 > std and s1 >= std):
                bad.append(f"{k}(std {std:.3g}, s1 {s1:.3g}, s2 {s2:.3g})")
        return not bad, "S2 > std and S1 >= std for all models" if not bad else "violations: " + ", ".join(bad)

    return _timed("8 robustness directionality", run)


def check_fine_tuning(results) -> CheckResult:
    from .bench import EXP2_SCENARIOS, stagnation_note

    def run():
        e2 = [r for r in results if r.experiment == 2]
        bad = []
        for k in ("MLP", "GRU", "GRU_AR"):
            for s in EXP2_SCENARIOS:
                e0 = _median(e2, model=k, scenario=s, phase="epoch0")
                e50 = _median(e2, model=k, scenario=s, phase="epoch50")
                if not e50 < e0:
                    bad.append(f"{k}/{s} ({e0:.3g} -> {e50:.3g})")
        note = stagnation_note(e2).strip()
        return not bad, ("Epoch 50 < Epoch 0 for MLP, GRU, GRU-AR on S4-S7" if not bad
                         else "violations: " + ", ".join(bad)) + f"; {note}"

    return _timed("9 fine-tuning directionality", run)


def check_determinism(path_a, path_b) -> CheckResult:
    from pathlib import Path

    def run():
        a, b = Path(path_a).read_bytes(), Path(path_b).read_bytes()
        return a == b and len(a) > 0, f"{len(a)} vs {len(b)} bytes, identical={a == b}"

    return _timed("10 determinism", run)


def experiment_checks(out_dir, profile: str = "desk", seeds: Sequence[int] | None = None,
                      workers: int = 1, log: Callable[[str], None] = print) -> list[CheckResult]:
    """Run criteria 7-10 on ``out_dir``: determinism pair first, then all seeds reuse its cache."""
    import shutil
    from pathlib import Path

    from .bench import ResultsStore, get_profile, run_experiment
    from .models import KINDS

    prof = get_profile(profile)
    seeds = list(prof.seeds if seeds is None else seeds)
    out = Path(out_dir)
    first, second, main = out / "determinism-a", out / "determinism-b", out / "main"
    for d in (first, second, main):
        shutil.rmtree(d, ignore_errors=True)

    t0 = time.perf_counter()
    log(f"experiment 1, seed {seeds[0]} (run A)")
    run_experiment(1, KINDS, seeds[:1], prof, first, workers=workers)
    t_first = time.perf_counter() - t0
    log(f"experiment 1, seed {seeds[0]} (run B)")
    run_experiment(1, KINDS, seeds[:1], prof, second, workers=workers)
    det = check_determinism(first / "results.jsonl", second / "results.jsonl")

    shutil.copytree(first, main)
    t1 = time.perf_counter()
    log(f"experiment 1, seeds {seeds}")
    run_experiment(1, KINDS, seeds, prof, main, workers=workers)
    wall = t_first + (time.perf_counter() - t1)
    log("experiment 2 (MLP, GRU, GRU-AR, TCN-FAE)")
    run_experiment(2, ["MLP", "GRU", "GRU_AR", "TCN_FAE"], seeds, prof, main, workers=workers)
    results = ResultsStore(main / "results.jsonl").results()
    return [check_learning(results, wall), check_robustness(results), check_fine_tuning(results), det]
