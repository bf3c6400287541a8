import json

import numpy as np
import pytest

from tankbench import bench
from tankbench.bench import (
    EvalResult, ResultsStore, build_table, dump_forecast, evaluate, forecast, get_profile,
    noise_floor, persistence_mse, read_forecast, render_csv, render_markdown, report,
    run_experiment, scenario_split, stagnation_note,
)
from tankbench.dataset import Sample
from tankbench.models import KINDS, ModelConfig, build_model

SMOKE = get_profile("smoke")


class Leaky:
    """Stand-in model that returns whatever forecast it is handed."""

    def __init__(self, preds):
        self.preds = preds
        self.config = ModelConfig("MLP")

    def predict(self, x):
        return self.preds[: len(x)]


def fixture_samples(n=4, seed=0):
    rng = np.random.default_rng(seed)
    return [Sample(rng.normal(size=(250, 3)), rng.normal(size=(50, 3))) for _ in range(n)]


@pytest.fixture(scope="module")
def smoke_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    tables = {e: run_experiment(e, None, None, SMOKE, out) for e in (1, 2, 3)}
    return out, tables


# -- metrics ------------------------------------------------------------------------

def test_evaluate_perfect_model_is_zero():
    samples = fixture_samples()
    model = Leaky(np.stack([s.target for s in samples]))
    assert evaluate(model, samples).test_mse == 0.0


def test_evaluate_zero_model_double_loop():
    samples = fixture_samples()
    model = Leaky(np.zeros((4, 50, 3)))
    total = 0.0
    for s in samples:
        acc = 0.0
        for t in range(50):
            for c in range(3):
                acc += s.target[t, c] ** 2
        total += acc / 150
    assert evaluate(model, samples).test_mse == pytest.approx(total / 4, rel=1e-12)


def test_evaluate_order_independent():
    m = build_model(ModelConfig("MLP", mlp_hidden=(4,)), 0)
    samples = fixture_samples(9)
    a = evaluate(m, samples).test_mse
    b = evaluate(m, samples[::-1]).test_mse
    assert a == pytest.approx(b, abs=1e-12)


def test_evaluate_empty_rejected():
    with pytest.raises(ValueError):
        evaluate(build_model(ModelConfig("MLP", mlp_hidden=(4,))), [])


def test_persistence_and_noise_floor():
    s = Sample(np.ones((250, 3)), np.full((50, 3), 3.0))
    assert persistence_mse([s]) == 4.0
    assert noise_floor(0.02) == pytest.approx(0.06)


def test_eval_result_validation():
    with pytest.raises(ValueError):
        EvalResult("MLP", "std", "none", "trained", float("nan"), 1, 0, "h")
    with pytest.raises(ValueError):
        EvalResult("MLP", "std", "none", "epoch7", 1.0, 1, 0, "h")


def test_record_round_trip_and_schema():
    r = EvalResult("GRU", "s2", "none", "trained", 0.5, 10, 1, "abc", 1)
    rec = json.loads(json.dumps(r.to_record()))
    assert EvalResult.from_record(rec) == r
    rec["schema"] = 99
    with pytest.raises(ValueError):
        EvalResult.from_record(rec)


def test_results_store_last_record_wins(tmp_path):
    store = ResultsStore(tmp_path / "r.jsonl")
    a = EvalResult("MLP", "std", "none", "trained", 1.0, 1, 0, "h", 1)
    store.append([a, EvalResult("MLP", "std", "none", "trained", 2.0, 1, 0, "h", 1)])
    (only,) = store.results()
    assert only.test_mse == 2.0 and store.keys() == {a.key}


def test_results_store_bad_line(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text("{not json}\n")
    with pytest.raises(ValueError, match="r.jsonl:1"):
        ResultsStore(p).records()


# -- scenario data ---------------------------------------------------------------------

def test_scenario_split_is_cached_and_tagged():
    a = scenario_split("s2", 0, SMOKE)
    assert a is scenario_split("s2", 0, SMOKE)
    assert a.meta["scenario"] == "s2" and a.meta["seed"] == 0


def test_s2_noise_is_exactly_three_times_standard():
    std, s2 = scenario_split("std", 0, SMOKE), scenario_split("s2", 0, SMOKE)
    from tankbench.sim import run_simulation, standard_config
    clean = run_simulation(standard_config(0), SMOKE.series_length).clean_values
    o = std.test[0].origin_step
    assert s2.test[0].origin_step == o
    n_std = std.test[0].input - clean[o:o + 250]
    n_s2 = s2.test[0].input - clean[o:o + 250]
    assert np.allclose(n_s2, 3 * n_std, atol=1e-12)


def test_s1_only_corrupts_inputs():
    std, s1 = scenario_split("std", 0, SMOKE), scenario_split("s1", 0, SMOKE)
    for a, b in zip(std.test, s1.test):
        assert np.array_equal(a.target, b.target)
        assert np.array_equal(a.input[-25:], b.input[-25:])
        assert not np.array_equal(a.input, b.input)


def test_unknown_profile():
    with pytest.raises(ValueError):
        get_profile("huge")


# -- experiments -------------------------------------------------------------------------

def test_table_shapes(smoke_dir):
    _, tables = smoke_dir
    assert tables[1].shape == (7, 4)
    assert tables[2].shape == (7, 8)
    assert tables[3].shape == (7, 9)
    for t in tables.values():
        assert np.all(np.isfinite(t.values)) and np.all(t.values >= 0)


def test_exp2_selection_contract(smoke_dir):
    out, _ = smoke_dir
    res = [r for r in ResultsStore(out / "results.jsonl").results() if r.experiment == 2 and r.model in KINDS]
    by = {(r.model, r.scenario, r.phase): r for r in res}
    for (m, sc, ph), r in by.items():
        if ph == "epoch50":
            assert r.val_mse <= by[(m, sc, "epoch0")].val_mse


def test_exp3_none_matches_exp1_and_exp2_bit_exactly(smoke_dir):
    out, _ = smoke_dir
    res = ResultsStore(out / "results.jsonl").results()
    get = {(r.experiment, r.model, r.scenario, r.augmentation, r.phase): r.test_mse for r in res}
    for m in KINDS:
        assert get[(3, m, "std", "none", "trained")] == get[(1, m, "std", "none", "trained")]
        assert get[(3, m, "s1", "none", "trained")] == get[(1, m, "s1", "none", "trained")]
        assert get[(3, m, "s5", "none", "trained")] == get[(2, m, "s5", "none", "epoch0")]


def test_exp3_fine_tunes_within_cap(smoke_dir):
    out, _ = smoke_dir
    for p in (out / "curves").glob("finetune-*.csv"):
        rows = p.read_text().splitlines()[1:]
        assert int(rows[-1].split(",")[0]) <= 50


def test_rerun_skips_and_force_appends(smoke_dir):
    out, _ = smoke_dir
    path = out / "results.jsonl"
    n = len(path.read_text().splitlines())
    run_experiment(1, ["MLP"], None, SMOKE, out)
    assert len(path.read_text().splitlines()) == n
    before = {r.key: r.test_mse for r in ResultsStore(path).results()}
    run_experiment(1, ["MLP"], None, SMOKE, out, force=True)
    assert len(path.read_text().splitlines()) > n
    after = {r.key: r.test_mse for r in ResultsStore(path).results()}
    assert after == before


def test_experiment_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(1, ["MLP", "TCN"], None, SMOKE, a)
    run_experiment(1, ["MLP", "TCN"], None, SMOKE, b)
    assert (a / "results.jsonl").read_bytes() == (b / "results.jsonl").read_bytes()


def test_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(1, ["MLP", "GRU"], None, SMOKE, a, workers=1)
    run_experiment(1, ["MLP", "GRU"], None, SMOKE, b, workers=2)
    assert (a / "results.jsonl").read_bytes() == (b / "results.jsonl").read_bytes()


def test_unknown_model_rejected(tmp_path):
    with pytest.raises(ValueError):
        run_experiment(1, ["LSTM"], None, SMOKE, tmp_path)


# -- reports -----------------------------------------------------------------------------

def test_markdown_marks_best_and_worst():
    rows = [EvalResult(m, "std", "none", "trained", v, 1, 0, "h", 1)
            for m, v in zip(KINDS, [0.1, 0.5, 0.3, 0.2, 0.9, 0.4, 0.6])]
    table = build_table(rows, 1)
    md = render_markdown(table)
    assert "**0.1" in md and "<u>0.9" in md
    assert "median" in md.lower()
    assert "\x1b[" in render_markdown(table, color=True)


def test_table_median_over_seeds():
    rows = [EvalResult("MLP", "std", "none", "trained", v, 1, s, "h", 1)
            for s, v in enumerate([1.0, 5.0, 2.0])]
    assert build_table(rows, 1, ["MLP"]).cell("MLP", "std") == 2.0


def test_report_is_pure(smoke_dir):
    out, tables = smoke_dir
    before = (out / "results.jsonl").read_bytes()
    md = report(out, "md")
    assert "MLP" in md and (out / "results.jsonl").read_bytes() == before
    csv_text = report(out, "csv")
    assert csv_text.splitlines()[0].startswith("model")
    assert render_csv(tables[1]).splitlines()[0].startswith("model")


def test_stagnation_note_mentions_model(smoke_dir):
    out, _ = smoke_dir
    note = stagnation_note(ResultsStore(out / "results.jsonl").results())
    assert "TCN" in note


# -- forecast dumps -------------------------------------------------------------------------

def test_dump_forecast_layout_and_bit_exactness(tmp_path):
    m = build_model(ModelConfig("MLP", mlp_hidden=(4,)), 0)
    samples = fixture_samples(3)
    dump_forecast(m, samples, tmp_path / "f.csv", index=1)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 300
    back = read_forecast(tmp_path / "f.csv")
    pred = forecast(m, samples)[1]
    for c in range(3):
        assert np.array_equal(back[c]["forecast"], pred[:, c])
        assert np.array_equal(back[c]["input"], samples[1].input[:, c])
        assert np.array_equal(back[c]["target"], samples[1].target[:, c])


def test_smoke_experiment_dumps_s1_forecasts(smoke_dir):
    out, _ = smoke_dir
    assert len(list((out / "forecasts").glob("*-s1-seed0.csv"))) == len(KINDS)


def test_parameter_report(tmp_path):
    p = bench.write_parameter_report(tmp_path, SMOKE)
    rows = p.read_text().splitlines()
    assert rows[0] == "model,parameters" and len(rows) == 1 + len(KINDS)
    counts = dict(bench.parameter_report())
    assert counts["MLP"] == 750 * 256 + 256 + 256 * 256 + 256 + 256 * 150 + 150
