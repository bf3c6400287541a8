import hashlib
import math
from fractions import Fraction

import numpy as np
import pytest

from tankbench.checks import check_integrator, check_physics
from tankbench.sim import (
    ControlInput, IntegrationDiverged, PhaseSchedule, ProcessPhase, SimConfig, TankState,
    TimeSeries, derivatives, phase_control, run_simulation, standard_config, step,
)

GOLDEN_SHA_SEED42_700 = "4a519fe98dea0ae893bfaf9ef9b5858f4479cc69950a0cb6ac58b269be423a6d"


def single_phase(control=ControlInput(), duration=5, **kw):
    return SimConfig(phases=(ProcessPhase("only", control, duration),), **kw)


# -- derivatives ----------------------------------------------------------

def test_derivatives_equal_levels_no_flow():
    c = ControlInput(kv12=1, kv23=1)
    assert derivatives(TankState(1, 1, 1), c) == (0.0, 0.0, 0.0)


def test_derivatives_hand_value():
    assert derivatives(TankState(4, 0, 0), ControlInput(kv12=0.5)) == (-1.0, 1.0, 0.0)


def test_derivatives_match_high_precision_oracle():
    # independent evaluation with 40-digit square roots via Fractions
    from decimal import Decimal, getcontext
    getcontext().prec = 40

    def sq(x):
        return Decimal(x.numerator) / Decimal(x.denominator)

    h1, h2, h3 = Fraction(2), Fraction(1), Fraction(1, 4)
    q1, q3, k12, k23, k3 = map(Fraction, ("0.1", "0.05", "0.2", "0.1", "0.4"))
    f12 = sq(k12) * sq(h1 - h2).sqrt()
    f23 = sq(k23) * sq(h2 - h3).sqrt()
    out = sq(k3) * sq(h3).sqrt()
    want = (sq(q1) - f12, f12 - f23, sq(q3) + f23 - out)
    got = derivatives(TankState(2, 1, 0.25), ControlInput(0.1, 0.05, 0.2, 0.1, 0.4))
    for g, w in zip(got, want):
        assert g == pytest.approx(float(w), rel=1e-12, abs=1e-15)


def test_derivatives_reject_bad_state():
    with pytest.raises(ValueError):
        derivatives(TankState(1, 1, -0.1), ControlInput())
    with pytest.raises(ValueError):
        derivatives(TankState(math.nan, 1, 1), ControlInput())


def test_control_rejects_negative():
    with pytest.raises(ValueError):
        ControlInput(q1=-1)


# -- step -----------------------------------------------------------------

def test_step_fixed_point():
    assert step(TankState(1, 1, 1), ControlInput(), 0.1) == TankState(1, 1, 1)


def test_step_constant_derivative_is_exact():
    s = step(TankState(0, 0, 0), ControlInput(q1=0.2), 0.5)
    assert s.h1 == pytest.approx(0.1, abs=1e-15)
    assert (s.h2, s.h3) == (0.0, 0.0)


def test_step_deterministic_and_clamped():
    c = ControlInput(kv3=5.0)
    a = step(TankState(0, 0, 0.01), c, 0.1)
    assert a == step(TankState(0, 0, 0.01), c, 0.1)
    assert a.h3 >= 0.0


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step(TankState(1, 1, 1), ControlInput(), 0.0)


def test_step_divergence_names_step():
    with pytest.raises(IntegrationDiverged, match="step 7"):
        step(TankState(1e308, 0, 0), ControlInput(q1=1e308), 10.0, step_index=7)


def test_rk4_matches_fine_euler():
    # independent reference: forward Euler at dt=1e-5 on its own rhs
    def rhs(h, u):
        q1, q3, a, b, c = u
        ss = lambda x: math.copysign(math.sqrt(abs(x)), x)
        f12, f23 = a * ss(h[0] - h[1]), b * ss(h[1] - h[2])
        return (q1 - f12, f12 - f23, q3 + f23 - c * math.sqrt(max(h[2], 0.0)))

    u = (0.1, 0.05, 0.2, 0.1, 0.4)
    h = [2.0, 1.0, 0.25]
    for _ in range(10000):
        d = rhs(h, u)
        h = [h[i] + 1e-5 * d[i] for i in range(3)]
    got = step(TankState(2, 1, 0.25), ControlInput(*u), 0.1)
    assert np.allclose(got.as_tuple(), h, atol=1e-6, rtol=0)


# -- scheduling -----------------------------------------------------------

def test_single_phase_schedule():
    cfg = single_phase(duration=5)
    assert phase_control(cfg, 12)[1] == 0


def test_standard_cycle_phase_names():
    cfg = standard_config()
    assert cfg.phases[phase_control(cfg, 0)[1]].name == "fill_tank1"
    assert cfg.phases[phase_control(cfg, 50)[1]].name == "mix_12_a"


def test_trend_extremum_zeroes_inflows():
    cfg = single_phase(ControlInput(q1=1, q3=1, kv3=0.3), trend_amplitude=0.5,
                       trend_baseline=0.5, trend_period_steps=4)
    c, _ = phase_control(cfg, 2)
    assert c.q1 == 0.0 and c.q3 == 0.0 and c.kv3 == 0.3


def test_schedule_overrides():
    sched = PhaseSchedule(standard_config(), [3, 2, 4])
    assert [sched.phase_at(t) for t in range(9)] == [0, 0, 0, 1, 1, 2, 2, 2, 2]
    with pytest.raises(ValueError):
        sched.phase_at(9)
    with pytest.raises(ValueError):
        sched.phase_at(-1)


# -- run_simulation ----------------------------------------------------------

def test_noise_free_fixed_point_series():
    cfg = single_phase(noise_sigma=0.0, initial_state=TankState(1, 1, 1))
    ts = run_simulation(cfg, 10)
    assert np.array_equal(ts.values, np.ones((10, 3)))


def test_standard_phase_index_sequence():
    ts = run_simulation(standard_config(), 700)
    expected = np.tile(np.repeat(np.arange(7), 50), 2)
    assert np.array_equal(ts.phase_index, expected)


def test_golden_checksum_seed42():
    ts = run_simulation(standard_config(42), 700)
    assert hashlib.sha256(ts.values.tobytes()).hexdigest() == GOLDEN_SHA_SEED42_700


def test_same_seed_bit_identical_other_seed_differs():
    a = run_simulation(standard_config(3), 200).values
    b = run_simulation(standard_config(3), 200).values
    c = run_simulation(standard_config(4), 200).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_noise_statistics():
    ts = run_simulation(standard_config(5), 3000)
    resid = ts.values - ts.clean_values
    assert abs(resid.std() - 0.02) < 0.001
    assert abs(resid.mean()) < 0.002


def test_closed_system_monotone_relaxation():
    cfg = single_phase(ControlInput(kv12=0.4, kv23=0.4), noise_sigma=0.0,
                       initial_state=TankState(3.0, 1.0, 0.0))
    ts = run_simulation(cfg, 300)
    gap = np.abs(np.diff(ts.clean_values, axis=1)).sum(axis=1)
    # the sign-sqrt law is not Lipschitz at zero gap, so RK4 settles a hair off exact equality
    coarse = gap[gap > 1e-2]
    assert np.all(np.diff(coarse) < 0)
    assert gap[-1] < 1e-2
    assert np.allclose(ts.clean_values.sum(axis=1), 4.0, atol=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(phases=())
    with pytest.raises(ValueError):
        single_phase(dt=0.2)
    with pytest.raises(ValueError):
        ProcessPhase("x", ControlInput(), 0)
    with pytest.raises(ValueError):
        run_simulation(standard_config(), 0)


def test_config_toml_round_trip():
    cfg = standard_config(9).replace(duration_jitter=2.0)
    back = SimConfig.from_toml(cfg.to_toml())
    assert back == cfg and back.config_hash() == cfg.config_hash()


def test_timeseries_csv_round_trip(tmp_path):
    ts = run_simulation(standard_config(1), 50)
    p = tmp_path / "s.csv"
    ts.to_csv(p, comment="config_hash=abc")
    assert p.read_text().startswith("# config_hash=abc\n")
    back = TimeSeries.from_csv(p)
    assert np.allclose(back.values, ts.values, rtol=1e-8, atol=1e-12)
    assert np.array_equal(back.phase_index, ts.phase_index)


def test_timeseries_csv_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ValueError):
        TimeSeries.from_csv(p)


def test_acceptance_physics_and_integrator_suites():
    assert check_physics().passed
    assert check_integrator().passed
