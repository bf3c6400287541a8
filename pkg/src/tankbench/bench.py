"""Experiment orchestration: training on 'standard', robustness evaluation,
fine-tuning on out-of-distribution scenarios and augmentation fine-tuning.

Every evaluated cell becomes an :class:`EvalResult` appended to
``<out>/results.jsonl``. Tables are rendered purely from stored records,
so re-rendering never retrains.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augment import augment_samples
from .checkpoint import Checkpoint
from .dataset import DatasetSplit, Sample, make_splits, stack
from .models import KINDS, Forecaster, ModelConfig, build_model
from .scenario import apply_scenario1, build_scenario, scenario_from_code
from .sim import run_simulation, standard_config
from .training import TrainConfig, TrainReport, fine_tune, train

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DISPLAY_NAMES = {
    "MLP": "MLP", "GRU": "GRU", "GRU_AR": "GRU-AR", "TCN": "TCN", "TCN_FAE": "TCN-FAE",
    "Transformer": "Transformer", "Transformer_CE": "Transf.-CE",
}
SCENARIO_NAMES = {
    "std": "Standard", "s1": "Scn. 1", "s2": "Scn. 2", "s3": "Scn. 3", "s4": "Scenario 4",
    "s5": "Scenario 5", "s6": "Scenario 6", "s7": "Scenario 7",
}
EXP1_SCENARIOS = ("std", "s1", "s2", "s3")
EXP2_SCENARIOS = ("s4", "s5", "s6", "s7")
EXP3_SCENARIOS = ("std", "s1", "s5")
AUGMENTATIONS = ("none", "noise", "warp")
PHASES = ("trained", "epoch0", "epoch50")


# -- profiles -------------------------------------------------------------------

DESK_MODELS = {
    "MLP": {},
    "GRU": {"gru_hidden": 32, "gru_layers": 1},
    "GRU_AR": {"gru_hidden": 64, "gru_layers": 1},
    "TCN": {"tcn_channels": 32, "tcn_convs_per_block": 1},
    "TCN_FAE": {"tcn_channels": 32, "tcn_convs_per_block": 1},
    "Transformer": {"d_model": 16, "n_heads": 2, "enc_layers": 1, "dec_layers": 1, "ff_dim": 32},
    "Transformer_CE": {"d_model": 16, "n_heads": 1, "enc_layers": 1, "dec_layers": 1, "ff_dim": 32},
}

SMOKE_MODELS = {
    "MLP": {"mlp_hidden": (16,)},
    "GRU": {"gru_hidden": 4, "gru_layers": 1},
    "GRU_AR": {"gru_hidden": 4, "gru_layers": 1},
    "TCN": {"tcn_channels": 4, "tcn_blocks": 2, "tcn_convs_per_block": 1},
    "TCN_FAE": {"tcn_channels": 4, "tcn_blocks": 2, "tcn_convs_per_block": 1,
                "fae_latent": 2, "fae_hidden": 8},
    "Transformer": {"d_model": 4, "n_heads": 1, "enc_layers": 1, "dec_layers": 1, "ff_dim": 8},
    "Transformer_CE": {"d_model": 4, "n_heads": 1, "enc_layers": 1, "dec_layers": 1, "ff_dim": 8},
}


@dataclass(frozen=True)
class Profile:
    name: str
    counts: tuple[int, int, int]
    max_epochs: int
    seeds: tuple[int, ...]
    series_length: int = 14000
    learning_rate: float = 1e-3
    batch_size: int = 32
    model_overrides: dict = field(default_factory=dict)

    def model_config(self, kind: str) -> ModelConfig:
        return ModelConfig(kind=kind, **self.model_overrides.get(kind, {}))

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, batch_size=self.batch_size,
                           max_epochs=self.max_epochs, seed=seed)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "counts": list(self.counts), "max_epochs": self.max_epochs,
            "series_length": self.series_length, "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
        }


PROFILES = {
    "desk": Profile("desk", (200, 50, 50), 125, (0, 1, 2), learning_rate=3e-3,
                    model_overrides=DESK_MODELS),
    "paper": Profile("paper", (1000, 100, 100), 1000, (0, 1, 2)),
    "smoke": Profile("smoke", (8, 4, 4), 2, (0,), series_length=3000, model_overrides=SMOKE_MODELS),
}


def get_profile(name: str) -> Profile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; expected one of {sorted(PROFILES)}") from None


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


# -- data -------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _split_cached(code: str, seed: int, counts: tuple, length: int) -> DatasetSplit:
    spec = scenario_from_code(code, base=standard_config(seed))
    series = run_simulation(build_scenario(spec), length)
    split = make_splits(series, counts, seed=seed)
    if code == "s1":
        rng = np.random.default_rng([seed, 1])
        split = DatasetSplit(*(apply_scenario1(split.subset(r), rng, spec.params)
                               for r in ("train", "val", "test")),
                             intervals=split.intervals)
    split.meta = {"scenario": code, "seed": seed, "series_length": length,
                  "sim_config_hash": build_scenario(spec).config_hash()}
    return split


def scenario_split(code: str, seed: int, profile: Profile) -> DatasetSplit:
    """Train/val/test windows for scenario ``code``.

    The same seed drives every scenario, so 'standard' and Scenario 2 share
    the clean trajectory and Scenario 1 corrupts the 'standard' windows.
    """
    return _split_cached(code, seed, tuple(profile.counts), profile.series_length)


# -- evaluation ---------------------------------------------------------------------

@dataclass(frozen=True)
class EvalResult:
    model: str
    scenario: str
    augmentation: str
    phase: str
    test_mse: float
    n_samples: int
    seed: int
    config_hash: str
    experiment: int = 0
    val_mse: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.test_mse) and self.test_mse >= 0):
            raise ValueError(f"test_mse must be finite and >= 0, got {self.test_mse}")
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")

    @property
    def key(self) -> str:
        return record_key(self.experiment, self.model, self.scenario, self.augmentation,
                          self.phase, self.seed, self.config_hash)

    def to_record(self) -> dict:
        return {"schema": SCHEMA_VERSION, "key": self.key, **dataclasses.asdict(self)}

    @classmethod
    def from_record(cls, rec: dict) -> "EvalResult":
        if rec.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported results schema {rec.get('schema')}")
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in rec.items() if k in names})


def record_key(experiment, model, scenario, augmentation, phase, seed, config_hash) -> str:
    return f"e{experiment}:{model}:{scenario}:{augmentation}:{phase}:s{seed}:{config_hash}"


def forecast(model: Forecaster, samples: Sequence[Sample]) -> np.ndarray:
    """Raw-unit forecasts [N, horizon, C]; the single code path for every metric and dump."""
    x, _ = stack(samples)
    return model.predict(x)


def evaluate(model: Forecaster, samples: Sequence[Sample], scenario: str = "std",
             augmentation: str = "none", phase: str = "trained", seed: int = 0,
             config_hash: str = "", experiment: int = 0) -> EvalResult:
    """Mean over samples of the per-sample MSE in raw level units."""
    if not samples:
        raise ValueError("empty test set")
    pred = forecast(model, samples)
    _, y = stack(samples)
    per_sample = np.mean((pred - y) ** 2, axis=(1, 2))
    return EvalResult(model.config.kind, scenario, augmentation, phase,
                      float(np.mean(per_sample)), len(samples), seed, config_hash, experiment)


def persistence_mse(samples: Sequence[Sample]) -> float:
    """MSE of repeating the last observed row over the horizon."""
    x, y = stack(samples)
    return float(np.mean((y - x[:, -1:, :]) ** 2))


def noise_floor(sigma: float, horizon: int = 50, channels: int = 3) -> float:
    return horizon * channels * sigma ** 2


# -- results store --------------------------------------------------------------------

class ResultsStore:
    """Append-only line-delimited JSON records; the last record per key wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        for i, line in enumerate(self.path.read_text().splitlines(), start=1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise ValueError(f"{self.path}:{i}: bad record: {e}") from None
        return out

    def keys(self) -> set[str]:
        return {r["key"] for r in self.records()}

    def results(self) -> list[EvalResult]:
        latest = {}
        for r in self.records():
            latest[r["key"]] = r
        return [EvalResult.from_record(r) for r in latest.values()]

    def append(self, results: Iterable[EvalResult]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            for r in results:
                fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")


# -- jobs ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Job:
    experiment: int
    kind: str
    seed: int
    profile: Profile
    out_dir: str

    @property
    def model_config(self) -> ModelConfig:
        return self.profile.model_config(self.kind)

    def train_hash(self) -> str:
        return _hash({"profile": self.profile.to_dict(), "model": self.model_config.to_dict(),
                      "train": self.profile.train_config(self.seed).to_dict(), "seed": self.seed})

    def cell_hash(self, augmentation: str = "none", phase: str = "trained") -> str:
        if phase == "trained":
            return self.train_hash()
        return _hash({"base": self.train_hash(), "augmentation": augmentation, "phase": phase,
                      "fine_tune_epochs": 50})

    def expected_keys(self) -> list[str]:
        cells = _cells(self.experiment)
        return [record_key(self.experiment, self.kind, sc, aug, ph, self.seed, self.cell_hash(aug, ph))
                for sc, aug, ph in cells]


def _cells(experiment: int) -> list[tuple[str, str, str]]:
    if experiment == 1:
        return [(s, "none", "trained") for s in EXP1_SCENARIOS]
    if experiment == 2:
        return [(s, "none", ph) for s in EXP2_SCENARIOS for ph in ("epoch0", "epoch50")]
    if experiment == 3:
        return [(s, a, "trained" if a == "none" else "epoch50")
                for a in AUGMENTATIONS for s in EXP3_SCENARIOS]
    raise ValueError(f"unknown experiment {experiment}")


def checkpoint_path(job: Job) -> Path:
    return Path(job.out_dir) / "checkpoints" / f"{job.kind}-seed{job.seed}-{job.train_hash()}.ckpt"


def trained_model(job: Job) -> Forecaster:
    """Model trained on 'standard' for this job, loaded from ``out/checkpoints`` when present."""
    path = checkpoint_path(job)
    if path.exists():
        return Checkpoint.load(path).to_model()
    split = scenario_split("std", job.seed, job.profile)
    model = build_model(job.model_config, job.seed)
    ckpt, report = train(model, split, job.profile.train_config(job.seed))
    ckpt.meta.update({"train_hash": job.train_hash(), "best_val_mse": report.best_val_mse})
    ckpt.save(path)
    curves = Path(job.out_dir) / "curves"
    curves.mkdir(parents=True, exist_ok=True)
    report.to_csv(curves / f"train-{job.kind}-seed{job.seed}.csv")
    return model


def _fine_tune_config(job: Job) -> TrainConfig:
    return job.profile.train_config(job.seed).for_fine_tuning(min(50, job.profile.max_epochs))


def _run_job(job: Job) -> list[EvalResult]:
    model = trained_model(job)
    seed, e = job.seed, job.experiment
    out: list[EvalResult] = []
    if e == 1:
        h = job.cell_hash()
        for sc in EXP1_SCENARIOS:
            split = scenario_split(sc, seed, job.profile)
            out.append(evaluate(model, split.test, sc, "none", "trained", seed, h, e))
            if sc == "s1" and seed == job.profile.seeds[0]:
                fdir = Path(job.out_dir) / "forecasts"
                fdir.mkdir(parents=True, exist_ok=True)
                dump_forecast(model, split.test, fdir / f"{job.kind}-s1-seed{seed}.csv")
    elif e == 2:
        base = Checkpoint.from_model(model)
        for sc in EXP2_SCENARIOS:
            split = scenario_split(sc, seed, job.profile)
            tuned = base.to_model()
            _, report = fine_tune(tuned, split, _fine_tune_config(job))
            r0 = evaluate(model, split.test, sc, "none", "epoch0", seed, job.cell_hash("none", "epoch0"), e)
            r50 = evaluate(tuned, split.test, sc, "none", "epoch50", seed, job.cell_hash("none", "epoch50"), e)
            out.append(dataclasses.replace(r0, val_mse=report.epoch0_val_mse))
            out.append(dataclasses.replace(r50, val_mse=report.best_val_mse))
            curves = Path(job.out_dir) / "curves"
            curves.mkdir(parents=True, exist_ok=True)
            report.to_csv(curves / f"finetune-{job.kind}-{sc}-seed{seed}.csv")
    elif e == 3:
        std = scenario_split("std", seed, job.profile)
        tests = {sc: scenario_split(sc, seed, job.profile).test for sc in EXP3_SCENARIOS}
        base = Checkpoint.from_model(model)
        for aug in AUGMENTATIONS:
            if aug == "none":
                tuned, phase = model, "trained"
            else:
                rng = np.random.default_rng([seed, 3, AUGMENTATIONS.index(aug)])
                train_samples = std.train + augment_samples(std.train, aug, None, rng)
                tuned = base.to_model()
                fine_tune(tuned, std, _fine_tune_config(job), train_samples=train_samples)
                phase = "epoch50"
            h = job.cell_hash(aug, phase)
            for sc in EXP3_SCENARIOS:
                out.append(evaluate(tuned, tests[sc], sc, aug, phase, seed, h, e))
    return out


def _persistence_results(experiment: int, seeds: Sequence[int], profile: Profile) -> list[EvalResult]:
    scen = {1: EXP1_SCENARIOS, 2: EXP2_SCENARIOS, 3: EXP3_SCENARIOS}[experiment]
    out = []
    for seed in seeds:
        h = _hash({"profile": profile.to_dict(), "baseline": "persistence", "seed": seed})
        for sc in scen:
            test = scenario_split(sc, seed, profile).test
            out.append(EvalResult("persistence", sc, "none", "trained", persistence_mse(test),
                                  len(test), seed, h, experiment))
    return out


def run_experiment(experiment: int, models: Sequence[str] | None = None,
                   seeds: Sequence[int] | None = None, profile: Profile | str = "desk",
                   out_dir: str | Path = "out", force: bool = False, workers: int = 1) -> "Table":
    """Run (or resume) one experiment and write its table to ``out_dir``.

    Jobs whose records are all present are skipped unless ``force``.
    Records are appended in job order whatever the worker count.
    """
    profile = get_profile(profile) if isinstance(profile, str) else profile
    models = list(models or KINDS)
    for m in models:
        if m not in KINDS:
            raise ValueError(f"unknown model {m!r}")
    seeds = list(profile.seeds if seeds is None else seeds)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = ResultsStore(out / "results.jsonl")
    have = store.keys()

    jobs = [Job(experiment, k, s, profile, str(out)) for s in seeds for k in models]
    todo = [j for j in jobs if force or not set(j.expected_keys()) <= have]
    log.info("experiment %d: %d jobs, %d to run", experiment, len(jobs), len(todo))
    if workers > 1 and len(todo) > 1:
        # checkpoints first, so no two workers train the same base model
        if experiment != 1:
            base = [Job(1, j.kind, j.seed, profile, str(out)) for j in todo]
            with ProcessPoolExecutor(workers) as ex:
                list(ex.map(_ensure_checkpoint, base))
        with ProcessPoolExecutor(workers) as ex:
            batches = list(ex.map(_run_job, todo))
    else:
        batches = [_run_job(j) for j in todo]
    new = [r for b in batches for r in b]
    baseline = [r for r in _persistence_results(experiment, seeds, profile) if force or r.key not in have]
    store.append(new + baseline)

    results = [r for r in store.results() if r.experiment == experiment and r.seed in seeds]
    table = build_table(results, experiment, models)
    write_table(table, out, f"table{experiment}")
    return table


def _ensure_checkpoint(job: Job) -> None:
    trained_model(job)


def run_experiment1(models=None, seeds=None, **kw) -> "Table":
    return run_experiment(1, models, seeds, **kw)


def run_experiment2(models=None, seeds=None, **kw) -> "Table":
    return run_experiment(2, models, seeds, **kw)


def run_experiment3(models=None, seeds=None, **kw) -> "Table":
    return run_experiment(3, models, seeds, **kw)


# -- tables ---------------------------------------------------------------------------

@dataclass
class Table:
    experiment: int
    rows: list[str]
    columns: list[tuple[str, str]]      # (group, sub-column)
    values: np.ndarray                  # median MSE, nan where missing
    seeds: list[int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def cell(self, model: str, group: str, sub: str = "") -> float:
        return float(self.values[self.rows.index(model), self.columns.index((group, sub))])


def _columns(experiment: int) -> list[tuple[str, str]]:
    if experiment == 1:
        return [(s, "") for s in EXP1_SCENARIOS]
    if experiment == 2:
        return [(s, ph) for s in EXP2_SCENARIOS for ph in ("epoch0", "epoch50")]
    return [(s, a) for s in EXP3_SCENARIOS for a in AUGMENTATIONS]


def _column_of(r: EvalResult) -> tuple[str, str]:
    if r.experiment == 1:
        return (r.scenario, "")
    if r.experiment == 2:
        return (r.scenario, r.phase)
    return (r.scenario, r.augmentation)


def build_table(results: Sequence[EvalResult], experiment: int,
                models: Sequence[str] | None = None) -> Table:
    """Median over seeds of each (model, column) cell."""
    models = list(models or KINDS)
    cols = _columns(experiment)
    cells: dict[tuple, list[float]] = {}
    seeds = set()
    for r in results:
        if r.experiment != experiment or r.model not in models:
            continue
        cells.setdefault((r.model, _column_of(r)), []).append(r.test_mse)
        seeds.add(r.seed)
    vals = np.full((len(models), len(cols)), np.nan)
    for i, m in enumerate(models):
        for j, c in enumerate(cols):
            if (m, c) in cells:
                vals[i, j] = float(np.median(cells[(m, c)]))
    return Table(experiment, models, cols, vals, sorted(seeds))


_SUB_LABELS = {"epoch0": "Epoch 0", "epoch50": "Epoch 50", "none": "None", "noise": "Noise",
               "warp": "Warp", "": ""}


def _header(table: Table) -> list[str]:
    return [SCENARIO_NAMES[g] + (f" / {_SUB_LABELS[s]}" if s else "") for g, s in table.columns]


def _marks(col: np.ndarray) -> tuple[int | None, int | None]:
    ok = np.where(np.isfinite(col))[0]
    if len(ok) < 2:
        return None, None
    return int(ok[np.argmin(col[ok])]), int(ok[np.argmax(col[ok])])


def render_markdown(table: Table, color: bool = False) -> str:
    """Markdown table: best per column in bold, worst underlined.

    With ``color`` the marks use ANSI escapes for terminal display instead.
    """
    bold = ("\033[1m", "\033[0m") if color else ("**", "**")
    under = ("\033[4m", "\033[0m") if color else ("<u>", "</u>")
    lines = [
        f"Experiment {table.experiment}: test MSE, median over seeds {table.seeds} "
        "(the reference tables report single runs)",
        "",
        "| Model | " + " | ".join(_header(table)) + " |",
        "|---" * (len(table.columns) + 1) + "|",
    ]
    marks = [_marks(table.values[:, j]) for j in range(len(table.columns))]
    for i, m in enumerate(table.rows):
        cells = []
        for j in range(len(table.columns)):
            v = table.values[i, j]
            s = "n/a" if not np.isfinite(v) else f"{v:.3f}"
            best, worst = marks[j]
            if i == best:
                s = f"{bold[0]}{s}{bold[1]}"
            elif i == worst:
                s = f"{under[0]}{s}{under[1]}"
            cells.append(s)
        lines.append(f"| {DISPLAY_NAMES.get(m, m)} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_csv(table: Table) -> str:
    lines = ["model," + ",".join(f"{g}:{s}" if s else g for g, s in table.columns)]
    for i, m in enumerate(table.rows):
        lines.append(m + "," + ",".join(repr(float(v)) for v in table.values[i]))
    return "\n".join(lines) + "\n"


def write_table(table: Table, out_dir: str | Path, stem: str) -> None:
    out = Path(out_dir)
    (out / f"{stem}.md").write_text(render_markdown(table))
    (out / f"{stem}.csv").write_text(render_csv(table))


def use_color(stream=None) -> bool:
    import sys
    stream = stream or sys.stdout
    return "NO_COLOR" not in os.environ and hasattr(stream, "isatty") and stream.isatty()


def report(results_dir: str | Path, fmt: str = "md", color: bool = False) -> str:
    """Render every experiment present in ``results_dir/results.jsonl``."""
    results = ResultsStore(Path(results_dir) / "results.jsonl").results()
    if not results:
        raise ValueError(f"no results in {results_dir}")
    parts = []
    for e in sorted({r.experiment for r in results}):
        models = [k for k in KINDS if any(r.model == k and r.experiment == e for r in results)]
        t = build_table(results, e, models)
        parts.append(render_markdown(t, color) if fmt == "md" else render_csv(t))
        if e == 2 and fmt == "md":
            parts.append(stagnation_note(results))
    return "\n".join(parts)


def stagnation_note(results: Sequence[EvalResult], model: str = "TCN_FAE", ratio: float = 0.9) -> str:
    """Flag scenarios where fine-tuning improved ``model`` by less than ``1 - ratio``."""
    t = build_table(results, 2, [model])
    flat = [s for s in EXP2_SCENARIOS
            if np.isfinite(t.cell(model, s, "epoch0")) and np.isfinite(t.cell(model, s, "epoch50"))
            and t.cell(model, s, "epoch50") > ratio * t.cell(model, s, "epoch0")]
    if not flat:
        return f"{DISPLAY_NAMES[model]}: no plateau detected (Epoch 50 < {ratio} x Epoch 0 everywhere).\n"
    return f"{DISPLAY_NAMES[model]}: plateau in {', '.join(flat)} (Epoch 50 >= {ratio} x Epoch 0).\n"


# -- forecast dumps and parameter counts ----------------------------------------------------

FORECAST_HEADER = ["channel", "step", "input", "target", "forecast"]


def dump_forecast(model: Forecaster, samples: Sequence[Sample] | Sample, path: str | Path,
                  index: int = 0) -> None:
    """Write input, target and forecast of one sample as CSV, one 300-row section per channel.

    The forecast comes from :func:`forecast` over the whole sample list, so it
    matches :func:`evaluate` bit for bit.
    """
    samples = [samples] if isinstance(samples, Sample) else list(samples)
    pred = forecast(model, samples)[index]
    s = samples[index]
    L, H = s.input.shape[0], s.target.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_HEADER)
        for c in range(s.input.shape[1]):
            for t in range(L + H):
                if t < L:
                    w.writerow([c, t, repr(float(s.input[t, c])), "", ""])
                else:
                    w.writerow([c, t, "", repr(float(s.target[t - L, c])), repr(float(pred[t - L, c]))])


def read_forecast(path: str | Path) -> dict[int, dict[str, np.ndarray]]:
    """Inverse of :func:`dump_forecast`: channel -> {'input', 'target', 'forecast'} arrays."""
    out: dict[int, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != FORECAST_HEADER:
            raise ValueError(f"{path}: not a forecast dump")
        for rec in reader:
            d = out.setdefault(int(rec[0]), {"input": [], "target": [], "forecast": []})
            for name, v in zip(("input", "target", "forecast"), rec[2:]):
                if v != "":
                    d[name].append(float(v))
    return {c: {k: np.array(v) for k, v in d.items()} for c, d in out.items()}


def parameter_report(profile: Profile | None = None) -> list[tuple[str, int]]:
    """(kind, parameter count) for each architecture; default configs when ``profile`` is None."""
    rows = []
    for k in KINDS:
        cfg = profile.model_config(k) if profile else ModelConfig(kind=k)
        rows.append((k, build_model(cfg, 0).parameter_count()))
    return rows


def write_parameter_report(out_dir: str | Path, profile: Profile | None = None) -> Path:
    path = Path(out_dir) / f"parameters-{profile.name if profile else 'default'}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "parameters"])
        w.writerows(parameter_report(profile))
    return path
