"""Forecasting windows cut from a simulated series, split by time interval."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli
import tomli_w

INPUT_LEN = 250
HORIZON = 50
ROLES = ("train", "val", "test")
CSV_HEADER = ["sample_id", "role", "row", "h1", "h2", "h3"]


@dataclass
class Sample:
    input: np.ndarray    # [input_len, 3]
    target: np.ndarray   # [horizon, 3]
    origin_step: int = -1


@dataclass
class DatasetSplit:
    train: list[Sample]
    val: list[Sample]
    test: list[Sample]
    intervals: tuple[tuple[int, int], ...] = ()
    meta: dict = field(default_factory=dict)

    def subset(self, role: str) -> list[Sample]:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        return getattr(self, role)

    def arrays(self, role: str) -> tuple[np.ndarray, np.ndarray]:
        return stack(self.subset(role))


def stack(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (inputs [N, L, C], targets [N, H, C])."""
    if not samples:
        return np.empty((0, INPUT_LEN, 3)), np.empty((0, HORIZON, 3))
    return (np.stack([s.input for s in samples]), np.stack([s.target for s in samples]))


def interval_bounds(length: int, proportions: Sequence[float]) -> list[tuple[int, int]]:
    total = float(sum(proportions))
    cuts = [0]
    acc = 0.0
    for p in proportions[:-1]:
        acc += p
        cuts.append(int(round(length * acc / total)))
    cuts.append(length)
    return [(cuts[i], cuts[i + 1]) for i in range(len(proportions))]


def window(values: np.ndarray, origin: int, input_len: int = INPUT_LEN,
           horizon: int = HORIZON) -> Sample:
    seg = values[origin:origin + input_len + horizon]
    return Sample(seg[:input_len].copy(), seg[input_len:].copy(), int(origin))


def make_splits(series, counts: Sequence[int] = (1000, 100, 100), seed: int = 0,
                proportions: Sequence[float] = (70, 15, 15), input_len: int = INPUT_LEN,
                horizon: int = HORIZON) -> DatasetSplit:
    """Sample train/val/test windows from contiguous, disjoint time intervals.

    Window origins are drawn uniformly with replacement so that every window
    lies entirely inside its interval.
    """
    values = series.values if hasattr(series, "values") else np.asarray(series)
    T = values.shape[0]
    span = input_len + horizon
    bounds = interval_bounds(T, proportions)
    rng = np.random.default_rng(seed)
    parts = []
    for role, n, (lo, hi) in zip(ROLES, counts, bounds):
        if n > 0 and hi - lo < span:
            raise ValueError(f"series too short: {role} interval [{lo}, {hi}) cannot hold "
                             f"a {span}-step window (T={T})")
        origins = rng.integers(lo, hi - span + 1, size=n) if n > 0 else []
        parts.append([window(values, int(o), input_len, horizon) for o in origins])
    return DatasetSplit(*parts, intervals=tuple(bounds))


# -- CSV ------------------------------------------------------------------------

def write_samples_csv(samples: Sequence[Sample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, s in enumerate(samples):
            for role, block in (("input", s.input), ("target", s.target)):
                for r, row in enumerate(block):
                    w.writerow([i, role, r, *(repr(float(v)) for v in row)])


def read_samples_csv(path: str | Path) -> list[Sample]:
    """Parse a samples file; malformed rows raise ``ValueError`` naming the line."""
    rows: dict[int, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                if len(rec) != 6:
                    raise ValueError(f"expected 6 fields, got {len(rec)}")
                sid, role, r = int(rec[0]), rec[1], int(rec[2])
                if role not in ("input", "target"):
                    raise ValueError(f"unknown role {role!r}")
                vals = [float(v) for v in rec[3:]]
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: malformed row: {e}") from None
            block = rows.setdefault(sid, {"input": [], "target": []})[role]
            if r != len(block):
                raise ValueError(f"{path}:{lineno}: row index {r} out of order for sample {sid}")
            block.append(vals)
    out = []
    for sid in sorted(rows):
        d = rows[sid]
        out.append(Sample(np.array(d["input"], dtype=np.float64).reshape(-1, 3),
                          np.array(d["target"], dtype=np.float64).reshape(-1, 3)))
    return out


def export_csv(split: DatasetSplit, out_dir: str | Path, meta: dict | None = None) -> None:
    """Write ``{train,val,test}.csv`` and ``meta.toml`` (origins, intervals, extra metadata)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for role in ROLES:
        write_samples_csv(split.subset(role), out / f"{role}.csv")
    doc = {
        "intervals": [list(b) for b in split.intervals],
        "origins": {role: [s.origin_step for s in split.subset(role)] for role in ROLES},
        **(split.meta or {}),
        **(meta or {}),
    }
    (out / "meta.toml").write_text(tomli_w.dumps(doc))


def import_csv(path: str | Path) -> DatasetSplit:
    """Load a directory written by :func:`export_csv`."""
    p = Path(path)
    parts = [read_samples_csv(p / f"{role}.csv") for role in ROLES]
    meta, intervals = {}, ()
    if (p / "meta.toml").exists():
        meta = tomli.loads((p / "meta.toml").read_text())
        intervals = tuple(tuple(b) for b in meta.pop("intervals", []))
        origins = meta.pop("origins", {})
        for role, samples in zip(ROLES, parts):
            for s, o in zip(samples, origins.get(role, [])):
                s.origin_step = int(o)
    return DatasetSplit(*parts, intervals=intervals, meta=meta)
