"""Command-line entry point: ``tankbench <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import bench
from .augment import augment_samples
from .checkpoint import Checkpoint
from .dataset import export_csv, import_csv
from .models import KINDS, ModelConfig, build_model
from .scenario import SCENARIO_CODES, build_scenario, scenario_from_code
from .sim import SimConfig, run_simulation, standard_config
from .training import TrainConfig, fine_tune, train

log = logging.getLogger("tankbench")


def _eprint(*a):
    print(*a, file=sys.stderr)


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _load_toml(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomli.load(fh)


def _effective(title: str, cfg: dict) -> None:
    _eprint(f"# effective {title}: {json.dumps(cfg, sort_keys=True, default=str)}")


# -- commands -----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    base = SimConfig.from_toml(args.config) if args.config else standard_config()
    base = base.replace(seed=args.seed)
    spec = scenario_from_code(args.scenario, base=base)
    cfg = build_scenario(spec)
    _effective("simulation config", {"scenario": args.scenario, **cfg.to_dict()})
    series = run_simulation(cfg, args.steps)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    series.to_csv(out, comment=f"config_hash={cfg.config_hash()} scenario={args.scenario} seed={args.seed}")
    print(f"wrote {len(series)} steps to {out} (config {cfg.config_hash()})")
    return 0


def cmd_dataset(args) -> int:
    prof = bench.get_profile(args.profile)
    split = bench.scenario_split(args.scenario, args.seed, prof)
    meta = {"profile": args.profile, "config_hash": bench._hash({"profile": prof.to_dict(), **split.meta}),
            **split.meta}
    _effective("dataset config", meta)
    export_csv(split, args.out, meta)
    print(f"wrote {len(split.train)}/{len(split.val)}/{len(split.test)} samples to {args.out}")
    return 0


def _model_config(args, file_cfg: dict) -> ModelConfig:
    prof = bench.get_profile(args.profile)
    kind = args.model or file_cfg.get("model", {}).get("kind")
    if kind is None:
        raise ValueError("no model kind given (use --model or [model] kind in the config file)")
    base = prof.model_config(kind).to_dict()
    base.update(file_cfg.get("model", {}))
    base["kind"] = kind
    return ModelConfig.from_dict(base)


def _train_config(args, file_cfg: dict, seed: int, fine: bool = False) -> TrainConfig:
    prof = bench.get_profile(args.profile)
    d = prof.train_config(seed).to_dict()
    d.update(file_cfg.get("train", {}))
    for flag, key in (("epochs", "max_epochs"), ("lr", "learning_rate"), ("batch_size", "batch_size")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    d["seed"] = seed
    if fine:
        d["fine_tune"] = True
        d["max_epochs"] = min(args.epochs, 50) if getattr(args, "epochs", None) is not None else 50
    return TrainConfig(**d)


def cmd_train(args) -> int:
    file_cfg = _load_toml(args.config)
    mcfg = _model_config(args, file_cfg)
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    tcfg = _train_config(args, file_cfg, seed)
    _effective("model config", mcfg.to_dict())
    _effective("train config", tcfg.to_dict())
    split = import_csv(args.data)
    model = build_model(mcfg, seed)
    ckpt, report = train(model, split, tcfg)
    ckpt.meta.update({"data": str(args.data), "best_val_mse": report.best_val_mse,
                      "train_config": tcfg.to_dict()})
    out = Path(args.out)
    ckpt.save(out)
    report.to_csv(out.with_suffix(".train.csv"))
    report.to_toml(out.with_suffix(".summary.toml"))
    print(f"best epoch {report.best_epoch}, val MSE {report.best_val_mse:.6g}; "
          f"wrote {out} (config {ckpt.config_hash})")
    return 0


def cmd_finetune(args) -> int:
    ckpt = Checkpoint.load(args.ckpt)
    seed = args.seed if args.seed is not None else ckpt.seed
    tcfg = _train_config(args, {}, seed, fine=True)
    split = import_csv(args.data) if args.data else bench.scenario_split(
        args.scenario, seed, bench.get_profile(args.profile))
    _effective("fine-tune config", {"scenario": args.scenario, "augment": args.augment, **tcfg.to_dict()})
    train_samples = None
    if args.augment != "none":
        rng = np.random.default_rng([seed, 3, bench.AUGMENTATIONS.index(args.augment)])
        train_samples = split.train + augment_samples(split.train, args.augment, args.strength, rng)
    model = ckpt.to_model()
    new, report = fine_tune(model, split, tcfg, train_samples=train_samples)
    new.meta.update({"fine_tuned_on": args.scenario, "augment": args.augment})
    out = Path(args.out) if args.out else Path(args.ckpt).with_name(
        f"{Path(args.ckpt).stem}-ft-{args.scenario}-{args.augment}.ckpt")
    new.save(out)
    report.to_csv(out.with_suffix(".train.csv"))
    report.to_toml(out.with_suffix(".summary.toml"))
    print(json.dumps({"epoch0_val_mse": report.epoch0_val_mse, "best_val_mse": report.best_val_mse,
                      "epoch0_test_mse": report.epoch0_test_mse, "test_mse": report.final_test_mse,
                      "checkpoint": str(out), "config_hash": new.config_hash}))
    return 0


def cmd_eval(args) -> int:
    ckpt = Checkpoint.load(args.ckpt)
    split = import_csv(args.data)
    samples = split.subset(args.role)
    r = bench.evaluate(ckpt.to_model(), samples, scenario=str(split.meta.get("scenario", "?")),
                       seed=ckpt.seed, config_hash=ckpt.config_hash)
    print(json.dumps({"model": r.model, "role": args.role, "mse": r.test_mse, "n_samples": r.n_samples,
                      "config_hash": r.config_hash}))
    return 0


def cmd_experiment(args) -> int:
    prof = bench.get_profile(args.profile)
    seeds = args.seeds if args.seeds is not None else list(prof.seeds)
    models = args.models.split(",") if args.models else list(KINDS)
    _effective("experiment config", {"experiment": args.number, "profile": prof.to_dict(),
                                     "seeds": seeds, "models": models})
    t0 = time.perf_counter()
    table = bench.run_experiment(args.number, models, seeds, prof, args.out,
                                 force=args.force, workers=args.workers)
    print(bench.render_markdown(table, bench.use_color()))
    _eprint(f"# finished in {time.perf_counter() - t0:.0f}s; results in {args.out}")
    bench.write_parameter_report(args.out, prof)
    if args.check:
        from . import checks
        results = bench.ResultsStore(Path(args.out) / "results.jsonl").results()
        res = {1: [checks.check_learning(results), checks.check_robustness(results)],
               2: [checks.check_fine_tuning(results)], 3: []}[args.number]
        for r in res:
            print(r.line())
        return 0 if all(r.passed for r in res) else 1
    return 0


def cmd_report(args) -> int:
    text = bench.report(args.results, args.format, color=args.out is None and bench.use_color())
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_check(args) -> int:
    from . import checks
    results = checks.quick_checks()
    for r in results:
        print(r.line(), flush=True)
    if not args.quick:
        for r in checks.experiment_checks(args.out, args.profile, args.seeds, args.workers,
                                          log=lambda m: _eprint(f"# {m}")):
            print(r.line(), flush=True)
            results.append(r)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed")
    return 0 if n_ok == len(results) else 1


def cmd_model_describe(args) -> int:
    mcfg = _model_config(args, _load_toml(args.config))
    model = build_model(mcfg, 0)
    print(json.dumps({"config": mcfg.to_dict(), "config_hash": mcfg.config_hash(),
                      "parameters": model.parameter_count()}, indent=1))
    return 0


# -- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tankbench", description="Three-tank forecasting robustness benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a scenario and write a series CSV")
    s.add_argument("--scenario", choices=SCENARIO_CODES, default="std")
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", help="simulation TOML (defaults to the packaged standard config)")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_simulate)

    d = sub.add_parser("dataset", help="dataset operations")
    dsub = d.add_subparsers(dest="action", required=True)
    g = dsub.add_parser("generate", help="write train/val/test CSVs for a scenario")
    g.add_argument("--scenario", choices=SCENARIO_CODES, default="std")
    g.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_dataset)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--model", choices=KINDS)
    t.add_argument("--data", required=True)
    t.add_argument("--config", help="TOML with [model] and [train] tables")
    t.add_argument("--out", required=True)
    t.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.set_defaults(fn=cmd_train)

    f = sub.add_parser("finetune", help="fine-tune a checkpoint on a scenario for at most 50 epochs")
    f.add_argument("--ckpt", required=True)
    f.add_argument("--scenario", choices=SCENARIO_CODES, required=True)
    f.add_argument("--augment", choices=bench.AUGMENTATIONS, default="none")
    f.add_argument("--aug-strength", dest="strength", type=float, help="noise sigma or warp jitter (default per augmentation)")
    f.add_argument("--data", help="dataset directory (default: generate from --profile/--seed)")
    f.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    f.add_argument("--seed", type=int)
    f.add_argument("--epochs", type=int)
    f.add_argument("--lr", type=float)
    f.add_argument("--batch-size", type=int)
    f.add_argument("--out")
    f.set_defaults(fn=cmd_finetune)

    e = sub.add_parser("eval", help="test MSE of a checkpoint on a dataset directory")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--role", choices=("train", "val", "test"), default="test")
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("experiment", help="run experiment 1, 2 or 3")
    x.add_argument("number", type=int, choices=(1, 2, 3))
    x.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    x.add_argument("--seeds", type=_seeds)
    x.add_argument("--models", help="comma-separated subset of " + ",".join(KINDS))
    x.add_argument("--out", default="out")
    x.add_argument("--force", action="store_true", help="rerun jobs already in the results file")
    x.add_argument("--workers", type=int, default=1)
    x.add_argument("--check", action="store_true", help="exit 1 if the experiment's acceptance checks fail")
    x.set_defaults(fn=cmd_experiment)

    r = sub.add_parser("report", help="render tables from stored results")
    r.add_argument("--results", required=True)
    r.add_argument("--format", choices=("md", "csv"), default="md")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_report)

    c = sub.add_parser("check", help="run the acceptance suite")
    c.add_argument("--quick", action="store_true", help="skip the experiment-level checks")
    c.add_argument("--out", default="out/check")
    c.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    c.add_argument("--seeds", type=_seeds)
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(fn=cmd_check)

    m = sub.add_parser("model", help="model utilities")
    msub = m.add_subparsers(dest="action", required=True)
    md = msub.add_parser("describe", help="print a model config and its parameter count")
    md.add_argument("--model", choices=KINDS)
    md.add_argument("--config")
    md.add_argument("--profile", choices=sorted(bench.PROFILES), default="desk")
    md.set_defaults(fn=cmd_model_describe)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, KeyError) as e:
        _eprint(f"tankbench {args.command}: error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
