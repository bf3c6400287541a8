"""The 'standard' scenario and the seven perturbed / out-of-distribution variants.

Scenarios 2-7 change the simulation config; scenario 1 (sensor faults) is
applied afterwards to individual forecasting samples.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Sample
from .sim import ControlInput, ProcessPhase, SimConfig, jitter_durations, standard_config

__all__ = [
    "ScenarioKind", "ScenarioParams", "ScenarioSpec", "build_scenario", "jitter_durations",
    "inject_point_anomaly", "inject_dead_sensor", "apply_scenario1", "scenario_from_code",
    "SCENARIO_CODES",
]


class ScenarioKind(enum.Enum):
    Standard = "std"
    SensorFaults = "s1"
    IncreasedNoise = "s2"
    VariablePhaseDuration = "s3"
    ScaledFlows = "s4"
    IndepMerge = "s5"
    IndepMergeStable = "s6"
    DepMerge = "s7"


SCENARIO_CODES = tuple(k.value for k in ScenarioKind)


@dataclass(frozen=True)
class ScenarioParams:
    fault_magnitude: float = 0.5    # point-anomaly spike, level units
    protected_tail: int = 25        # last input steps never corrupted
    dead_max_steps: int = 50
    noise_multiplier: float = 3.0
    jitter_sigma: float = 10.0      # phase-duration noise, steps
    flow_scale: float = 1.5
    stable_duration: int = 50


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    params: ScenarioParams = field(default_factory=ScenarioParams)
    base: SimConfig | None = None

    def base_config(self) -> SimConfig:
        return self.base if self.base is not None else standard_config()

    def to_dict(self) -> dict:
        return {"scenario": self.kind.value, **dataclasses.asdict(self.params)}

    @classmethod
    def from_dict(cls, d: dict, base: SimConfig | None = None) -> "ScenarioSpec":
        d = dict(d)
        kind = ScenarioKind(d.pop("scenario"))
        return cls(kind, ScenarioParams(**d), base)


def scenario_from_code(code: str, base: SimConfig | None = None, **overrides) -> ScenarioSpec:
    try:
        kind = ScenarioKind(code)
    except ValueError:
        raise ValueError(f"unknown scenario {code!r}; expected one of {SCENARIO_CODES}") from None
    return ScenarioSpec(kind, ScenarioParams(**overrides), base)


def _phase(config: SimConfig, name: str) -> ProcessPhase:
    for p in config.phases:
        if p.name == name:
            return p
    raise ValueError(f"base config has no phase named {name!r}")


def _merge(name: str, a: ProcessPhase, b: ProcessPhase) -> ProcessPhase:
    ca, cb = a.control, b.control
    merged = ControlInput(*(max(getattr(ca, f), getattr(cb, f))
                            for f in ("q1", "q3", "kv12", "kv23", "kv3")))
    return ProcessPhase(name, merged, a.duration_steps)


def build_scenario(spec: ScenarioSpec) -> SimConfig:
    """Simulation config for ``spec``; the base config is never modified."""
    base = spec.base_config()
    p = spec.params
    kind = spec.kind
    if kind in (ScenarioKind.Standard, ScenarioKind.SensorFaults):
        return base
    if kind is ScenarioKind.IncreasedNoise:
        return base.replace(noise_sigma=base.noise_sigma * p.noise_multiplier)
    if kind is ScenarioKind.VariablePhaseDuration:
        return base.replace(duration_jitter=p.jitter_sigma)
    if kind is ScenarioKind.ScaledFlows:
        phases = tuple(dataclasses.replace(ph, control=ph.control.scaled(p.flow_scale))
                       for ph in base.phases)
        return base.replace(phases=phases)
    if kind in (ScenarioKind.IndepMerge, ScenarioKind.IndepMergeStable):
        fill, empty = _phase(base, "fill_tank1"), _phase(base, "empty_tank3")
        phases = []
        for ph in base.phases:
            if ph.name == "fill_tank1":
                phases.append(_merge("fill_tank1_empty_tank3", fill, empty))
            elif ph.name != "empty_tank3":
                phases.append(ph)
        if kind is ScenarioKind.IndepMergeStable:
            phases.append(ProcessPhase("stable", ControlInput(), p.stable_duration))
        return base.replace(phases=tuple(phases))
    if kind is ScenarioKind.DepMerge:
        phases = []
        names = [ph.name for ph in base.phases]
        i = 0
        while i < len(base.phases):
            ph = base.phases[i]
            if ph.name.startswith("mix_12") and i + 1 < len(names) and names[i + 1].startswith("mix_23"):
                suffix = ph.name.rsplit("_", 1)[-1]
                phases.append(_merge(f"mix_all_{suffix}", ph, base.phases[i + 1]))
                i += 2
            else:
                phases.append(ph)
                i += 1
        return base.replace(phases=tuple(phases))
    raise ValueError(f"unknown scenario kind {kind!r}")


# -- sensor faults --------------------------------------------------------------

def _copy(sample: Sample) -> Sample:
    return Sample(sample.input.copy(), sample.target.copy(), sample.origin_step)


def _candidate_range(sample: Sample, protected_tail: int) -> int:
    n = sample.input.shape[0] - protected_tail
    if n <= 0:
        raise ValueError(f"protected tail {protected_tail} leaves no candidate steps "
                         f"in an input of length {sample.input.shape[0]}")
    return n


def inject_point_anomaly(sample: Sample, rng: np.random.Generator,
                         magnitude: float = 0.5, protected_tail: int = 25) -> Sample:
    """Add a +/- ``magnitude`` spike to one sensor at one step before the protected tail."""
    n = _candidate_range(sample, protected_tail)
    out = _copy(sample)
    sensor = int(rng.integers(out.input.shape[1]))
    t = int(rng.integers(n))
    sign = 1.0 if rng.random() < 0.5 else -1.0
    out.input[t, sensor] += sign * magnitude
    return out


def inject_dead_sensor(sample: Sample, rng: np.random.Generator,
                       max_duration: int = 50, protected_tail: int = 25) -> Sample:
    """Zero one sensor for 1..``max_duration`` consecutive steps ending before the protected tail."""
    n = _candidate_range(sample, protected_tail)
    out = _copy(sample)
    sensor = int(rng.integers(out.input.shape[1]))
    d = min(int(rng.integers(1, max_duration + 1)), n)
    start = int(rng.integers(n - d + 1))
    out.input[start:start + d, sensor] = 0.0
    return out


def apply_scenario1(samples: list[Sample], rng: np.random.Generator,
                    params: ScenarioParams = ScenarioParams()) -> list[Sample]:
    """Point anomalies on a random half of the samples, dead sensors on the rest.

    With an odd count the extra sample gets a point anomaly.
    """
    n = len(samples)
    n_point = math.ceil(n / 2)
    point = np.zeros(n, dtype=bool)
    point[rng.permutation(n)[:n_point]] = True
    out = []
    for s, is_point in zip(samples, point):
        if is_point:
            out.append(inject_point_anomaly(s, rng, params.fault_magnitude, params.protected_tail))
        else:
            out.append(inject_dead_sensor(s, rng, params.dead_max_steps, params.protected_tail))
    return out
