"""Three-tank process simulation.

Continuous dynamics of three coupled tanks (inflow into tanks 1 and 3, valves
between 1-2 and 2-3, outflow from tank 3), integrated with classical RK4,
driven by a cyclic schedule of process phases with a slow cosine trend on
the inflows, and observed through Gaussian sensor noise.
"""

from __future__ import annotations

import bisect
import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli
import tomli_w

CONTROL_FIELDS = ("q1", "q3", "kv12", "kv23", "kv3")
CSV_HEADER = ["step", "phase", "h1", "h2", "h3", "h1_clean", "h2_clean", "h3_clean"]


class IntegrationDiverged(RuntimeError):
    """Raised when the integrator produces a non-finite level."""


@dataclass(frozen=True)
class TankState:
    h1: float
    h2: float
    h3: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.h1, self.h2, self.h3)


@dataclass(frozen=True)
class ControlInput:
    q1: float = 0.0
    q3: float = 0.0
    kv12: float = 0.0
    kv23: float = 0.0
    kv3: float = 0.0

    def __post_init__(self):
        for name in CONTROL_FIELDS:
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"control {name} must be finite and >= 0, got {v}")

    def scaled(self, factor: float) -> "ControlInput":
        return ControlInput(*(getattr(self, n) * factor for n in CONTROL_FIELDS))


@dataclass(frozen=True)
class ProcessPhase:
    name: str
    control: ControlInput
    duration_steps: int = 50

    def __post_init__(self):
        if self.duration_steps < 1:
            raise ValueError(f"phase {self.name!r}: duration_steps must be >= 1")


@dataclass(frozen=True)
class SimConfig:
    """All constants needed to generate one time series.

    ``duration_jitter`` > 0 turns on per-occurrence phase-duration noise
    (variable phase duration scenario); the draws come from a scheduling
    stream separate from the sensor-noise stream.
    """

    phases: tuple[ProcessPhase, ...]
    dt: float = 0.1
    substeps: int = 10
    noise_sigma: float = 0.02
    trend_amplitude: float = 0.25
    trend_period_steps: int = 3500
    trend_baseline: float = 0.75
    seed: int = 0
    initial_state: TankState = field(default_factory=lambda: TankState(0.0, 0.0, 0.0))
    duration_jitter: float = 0.0

    def __post_init__(self):
        if not self.phases:
            raise ValueError("phases must be non-empty")
        if self.substeps < 1 or self.dt <= 0:
            raise ValueError("dt must be > 0 and substeps >= 1")
        if abs(self.substeps * self.dt - 1.0) > 1e-12:
            raise ValueError(f"substeps * dt must equal 1.0, got {self.substeps * self.dt}")
        if self.noise_sigma < 0 or self.trend_amplitude < 0 or self.trend_baseline < 0:
            raise ValueError("noise_sigma, trend_amplitude and trend_baseline must be >= 0")
        if self.trend_period_steps < 1:
            raise ValueError("trend_period_steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def cycle_length(self) -> int:
        return sum(p.duration_steps for p in self.phases)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "dt": self.dt,
            "substeps": self.substeps,
            "noise_sigma": self.noise_sigma,
            "trend_amplitude": self.trend_amplitude,
            "trend_period_steps": self.trend_period_steps,
            "trend_baseline": self.trend_baseline,
            "seed": self.seed,
            "duration_jitter": self.duration_jitter,
            "initial_state": list(self.initial_state.as_tuple()),
            "phases": [
                {"name": p.name, "duration_steps": p.duration_steps,
                 **{n: getattr(p.control, n) for n in CONTROL_FIELDS}}
                for p in self.phases
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        phases = tuple(
            ProcessPhase(
                name=p["name"],
                control=ControlInput(**{n: float(p.get(n, 0.0)) for n in CONTROL_FIELDS}),
                duration_steps=int(p.get("duration_steps", 50)),
            )
            for p in d["phases"]
        )
        return cls(
            phases=phases,
            dt=float(d.get("dt", 0.1)),
            substeps=int(d.get("substeps", 10)),
            noise_sigma=float(d.get("noise_sigma", 0.02)),
            trend_amplitude=float(d.get("trend_amplitude", 0.25)),
            trend_period_steps=int(d.get("trend_period_steps", 3500)),
            trend_baseline=float(d.get("trend_baseline", 0.75)),
            seed=int(d.get("seed", 0)),
            initial_state=TankState(*map(float, d.get("initial_state", (0.0, 0.0, 0.0)))),
            duration_jitter=float(d.get("duration_jitter", 0.0)),
        )

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, path_or_text: str | Path) -> "SimConfig":
        p = Path(path_or_text)
        text = p.read_text() if "\n" not in str(path_or_text) and p.exists() else str(path_or_text)
        return cls.from_dict(tomli.loads(text))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def standard_config(seed: int = 0) -> SimConfig:
    """The 'standard' scenario constants shipped in ``configs/standard.toml``."""
    text = resources.files("tankbench.configs").joinpath("standard.toml").read_text()
    return SimConfig.from_toml(text).replace(seed=seed)


@dataclass
class TimeSeries:
    values: np.ndarray        # [T, 3] noisy sensor readings
    clean_values: np.ndarray  # [T, 3] committed levels
    phase_index: np.ndarray   # [T] int
    controls: list            # [T] effective ControlInput (trend applied)

    def __len__(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path: str | Path, comment: str | None = None) -> None:
        """Write the series; ``comment`` becomes a leading ``# ...`` line."""
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for t in range(len(self)):
                row = [t, int(self.phase_index[t])]
                row += [f"{v:.9g}" for v in self.values[t]]
                row += [f"{v:.9g}" for v in self.clean_values[t]]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(line for line in fh if not line.startswith("#")))
        if not rows or rows[0] != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
        arr = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 8)
        return cls(
            values=arr[:, 2:5].copy(),
            clean_values=arr[:, 5:8].copy(),
            phase_index=arr[:, 1].astype(int),
            controls=[],
        )


# -- dynamics -------------------------------------------------------------

def _ssqrt(x: float) -> float:
    # sign(x) * sqrt(|x|) with sign(0) = 0
    if x > 0:
        return math.sqrt(x)
    if x < 0:
        return -math.sqrt(-x)
    return 0.0


def _rhs(h1, h2, h3, q1, q3, kv12, kv23, kv3):
    f12 = kv12 * _ssqrt(h1 - h2)
    f23 = kv23 * _ssqrt(h2 - h3)
    out = kv3 * math.sqrt(h3) if h3 > 0 else 0.0
    return q1 - f12, f12 - f23, q3 + f23 - out


def derivatives(state: TankState, control: ControlInput) -> tuple[float, float, float]:
    """Right-hand side of the tank ODE at ``state`` under ``control``."""
    h = state.as_tuple()
    if not all(math.isfinite(v) for v in h):
        raise ValueError(f"non-finite state {h}")
    if state.h3 < 0:
        raise ValueError(f"h3 must be >= 0, got {state.h3}")
    return _rhs(*h, control.q1, control.q3, control.kv12, control.kv23, control.kv3)


def _rk4(h1, h2, h3, u, dt):
    a1, a2, a3 = _rhs(h1, h2, h3, *u)
    b1, b2, b3 = _rhs(h1 + 0.5 * dt * a1, h2 + 0.5 * dt * a2, h3 + 0.5 * dt * a3, *u)
    c1, c2, c3 = _rhs(h1 + 0.5 * dt * b1, h2 + 0.5 * dt * b2, h3 + 0.5 * dt * b3, *u)
    d1, d2, d3 = _rhs(h1 + dt * c1, h2 + dt * c2, h3 + dt * c3, *u)
    s = dt / 6.0
    n1 = h1 + s * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    n2 = h2 + s * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
    n3 = h3 + s * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
    return (_clamp(n1), _clamp(n2), _clamp(n3))


def _clamp(v: float) -> float:
    # NaN passes through so the caller's finiteness check still fires
    return v if v > 0 or v != v else 0.0


def _controls_tuple(c: ControlInput):
    return (c.q1, c.q3, c.kv12, c.kv23, c.kv3)


def step(state: TankState, control: ControlInput, dt: float, step_index: int | None = None) -> TankState:
    """One RK4 step of size ``dt`` followed by clamping levels at zero."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    new = _rk4(*state.as_tuple(), _controls_tuple(control), dt)
    if not all(math.isfinite(v) for v in new):
        where = "" if step_index is None else f" at step {step_index}"
        raise IntegrationDiverged(f"integration diverged{where}: {new}")
    return TankState(*new)


# -- scheduling -----------------------------------------------------------

def trend_factor(config: SimConfig, global_step: int) -> float:
    f = config.trend_baseline + config.trend_amplitude * math.cos(
        2.0 * math.pi * global_step / config.trend_period_steps)
    return f if f > 0 else 0.0


class PhaseSchedule:
    """Maps global steps to phase occurrences.

    Without overrides the cycle repeats with each phase's nominal duration.
    ``durations`` lists per-occurrence lengths; occurrence ``k`` runs phase
    ``k % n_phases``.
    """

    def __init__(self, config: SimConfig, durations: Sequence[int] | None = None):
        self.n_phases = len(config.phases)
        self.cycle = config.cycle_length
        self._bounds = None
        self._offsets = np.cumsum([0] + [p.duration_steps for p in config.phases])
        if durations is not None:
            if any(d < 1 for d in durations):
                raise ValueError("override durations must be >= 1")
            self._bounds = list(np.cumsum(durations))

    def phase_at(self, global_step: int) -> int:
        if global_step < 0:
            raise ValueError("global_step must be >= 0")
        if self._bounds is not None:
            k = bisect.bisect_right(self._bounds, global_step)
            if k >= len(self._bounds):
                raise ValueError(f"duration overrides do not cover step {global_step}")
            return k % self.n_phases
        pos = global_step % self.cycle
        return int(np.searchsorted(self._offsets, pos, side="right") - 1)


def phase_control(config: SimConfig, global_step: int,
                  schedule: PhaseSchedule | None = None) -> tuple[ControlInput, int]:
    """Active control (trend applied to inflows) and phase index at ``global_step``."""
    schedule = schedule or PhaseSchedule(config)
    idx = schedule.phase_at(global_step)
    c = config.phases[idx].control
    f = trend_factor(config, global_step)
    return dataclasses.replace(c, q1=c.q1 * f, q3=c.q3 * f), idx


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    noise_ss, sched_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise_ss), np.random.default_rng(sched_ss)


def jitter_durations(config: SimConfig, sigma_steps: float, rng: np.random.Generator,
                     n_steps: int) -> list[int]:
    """Per-occurrence phase durations ``max(1, round(nominal + N(0, sigma^2)))``.

    Draws occurrences until they cover ``n_steps``.
    """
    if sigma_steps < 0:
        raise ValueError("sigma_steps must be >= 0")
    out, total, k = [], 0, 0
    n = len(config.phases)
    while total < n_steps:
        nominal = config.phases[k % n].duration_steps
        d = nominal if sigma_steps == 0 else max(1, int(round(nominal + rng.normal(0.0, sigma_steps))))
        out.append(d)
        total += d
        k += 1
    return out


def run_simulation(config: SimConfig, n_steps: int) -> TimeSeries:
    """Simulate ``n_steps`` observation steps from ``config.initial_state``.

    Row ``t`` holds the state committed after the controls of step ``t - 1``
    acted; row 0 is the initial state.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    noise_rng, sched_rng = _streams(config.seed)
    durations = None
    if config.duration_jitter > 0:
        durations = jitter_durations(config, config.duration_jitter, sched_rng, n_steps)
    schedule = PhaseSchedule(config, durations)

    clean = np.empty((n_steps, 3))
    phase_idx = np.empty(n_steps, dtype=np.int64)
    controls = []
    h = config.initial_state.as_tuple()
    dt = config.dt
    for t in range(n_steps):
        control, idx = phase_control(config, t, schedule)
        clean[t] = h
        phase_idx[t] = idx
        controls.append(control)
        u = _controls_tuple(control)
        for _ in range(config.substeps):
            h = _rk4(*h, u, dt)
        if not (math.isfinite(h[0]) and math.isfinite(h[1]) and math.isfinite(h[2])):
            raise IntegrationDiverged(f"integration diverged at step {t}: {h}")
    noise = noise_rng.standard_normal((n_steps, 3))
    values = clean + config.noise_sigma * noise
    return TimeSeries(values=values, clean_values=clean, phase_index=phase_idx, controls=controls)
