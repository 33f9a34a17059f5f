"""TPE engine: splits, Parzen densities, suggestion loop, reporting."""
import json
import math

import numpy as np
import pytest

from autonilm.searchspace import Configuration, ParamSpec, builtin_space, subspace, validate_config
from autonilm.tpe import (
    ParzenDensity,
    TpeConfig,
    Trial,
    TrialHistory,
    fit_parzen,
    report,
    run_optimization,
    run_report,
    score_candidates,
    split_observations,
    suggest,
    write_run_report,
)


def _completed(trial_id, method, assignments, loss):
    return Trial(id=trial_id, config=Configuration(method, assignments),
                 loss=loss, status="completed")


def _dt_history(losses):
    h = TrialHistory()
    for i, loss in enumerate(losses):
        h.trials.append(_completed(i, "DT", {"criterion": "MSE", "min_sample_split": 10 + i}, loss))
    h.next_id = len(losses)
    return h


# ---------------------------------------------------------------- splits


def _oracle_n_good(n, gamma):
    # smallest integer >= gamma * sqrt(n), clamped to [1, 25]
    g = 1
    while g < gamma * math.sqrt(n):
        g += 1
    return max(1, min(25, g))


def test_split_sizes_match_ceil_rule():
    for n in (1, 4, 9, 16, 17, 25, 100, 400, 2500, 10_000, 12_000):
        h = _dt_history(list(np.linspace(0.0, 1.0, n)))
        good, bad = split_observations(h, 0.25)
        assert len(good) == _oracle_n_good(n, 0.25), n
        assert len(good) + len(bad) == n


def test_split_worked_examples():
    good, bad = split_observations(_dt_history([0.5] * 9), 0.25)
    assert len(good) == 1
    good, bad = split_observations(_dt_history(list(range(100))), 0.25)
    assert len(good) == 3
    good, bad = split_observations(_dt_history([1.0]), 0.25)
    assert len(good) == 1 and bad == []


def test_split_separates_by_loss():
    rng = np.random.default_rng(5)
    for _ in range(20):
        losses = rng.uniform(0, 100, int(rng.integers(2, 60))).tolist()
        good, bad = split_observations(_dt_history(losses), 0.25)
        assert max(t.loss for t in good) <= min(t.loss for t in bad)


def test_split_requires_completed_trials():
    with pytest.raises(ValueError):
        split_observations(TrialHistory(), 0.25)


def test_failed_trials_never_enter_the_split():
    h = _dt_history([1.0, 2.0])
    tid, _ = suggest(h, subspace(builtin_space(), ["DT"]), TpeConfig(n_startup=0), np.random.default_rng(0))
    report(h, tid, None)
    good, bad = split_observations(h, 0.25)
    assert len(good) + len(bad) == 2


# ---------------------------------------------------------------- Parzen fits


def test_categorical_counts_with_prior():
    spec = ParamSpec("loss", "cat", ("MSE", "MAE"))
    d = fit_parzen(["MAE", "MAE"], spec, prior_weight=1.0)
    assert d.labels == ("MSE", "MAE")
    np.testing.assert_allclose(d.probs, [0.25, 0.75])
    assert abs(d.probs.sum() - 1.0) < 1e-9


def test_categorical_empty_is_uniform():
    spec = ParamSpec("opt", "cat", ("Adam", "Nadam", "RMSprop"))
    d = fit_parzen([], spec)
    np.testing.assert_allclose(d.probs, [1 / 3] * 3)


def test_continuous_empty_is_prior_alone():
    spec = ParamSpec("dropout", "float", lo=0.1, hi=0.6)
    d = fit_parzen([], spec)
    assert d.centers.tolist() == [0.35]
    assert d.bandwidths.tolist() == [0.5]
    assert d.weights.tolist() == [1.0]


def _trapezoid_integral(density, n_points=10_000):
    grid = np.linspace(density.lo, density.hi, n_points)
    vals = density.pdf(grid)
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid)))


def test_continuous_density_integrates_to_one():
    spec = ParamSpec("dropout", "float", lo=0.1, hi=0.6)
    rng = np.random.default_rng(11)
    for _ in range(10):
        values = rng.uniform(0.1, 0.6, int(rng.integers(0, 15))).tolist()
        d = fit_parzen(values, spec)
        assert abs(_trapezoid_integral(d) - 1.0) < 1e-3


def test_quantized_density_integrates_to_one():
    spec = ParamSpec("mss", "int", lo=2, hi=200)
    d = fit_parzen([2, 50, 50, 199], spec)
    assert abs(_trapezoid_integral(d) - 1.0) < 1e-3


def test_parzen_bandwidths_bounded_by_range():
    spec = ParamSpec("mss", "int", lo=2, hi=200)
    rng = np.random.default_rng(3)
    for _ in range(20):
        values = rng.integers(2, 201, int(rng.integers(1, 12))).tolist()
        d = fit_parzen(values, spec)
        width = 200 - 2
        assert np.all(d.bandwidths > 0)
        assert np.all(d.bandwidths <= width)
        assert d.bandwidths[-1] == width  # prior component
        assert np.all(d.bandwidths >= width / 100.0)
        assert abs(d.weights.sum() - 1.0) < 1e-9


def test_parzen_rejects_out_of_domain_observation():
    spec = ParamSpec("dropout", "float", lo=0.1, hi=0.6)
    with pytest.raises(ValueError):
        fit_parzen([0.7], spec)


def test_continuous_samples_stay_in_domain():
    spec = ParamSpec("dropout", "float", lo=0.1, hi=0.6)
    d = fit_parzen([0.11, 0.55], spec)
    rng = np.random.default_rng(9)
    draws = [d.sample(rng) for _ in range(500)]
    assert all(0.1 <= x <= 0.6 for x in draws)


def test_quantized_samples_are_integers_in_bounds():
    spec = ParamSpec("mss", "int", lo=2, hi=200)
    d = fit_parzen([2, 3, 198], spec)
    rng = np.random.default_rng(9)
    for _ in range(500):
        v = d.sample(rng)
        assert isinstance(v, int) and 2 <= v <= 200


# ---------------------------------------------------------------- scoring


def test_score_ties_return_first_candidate():
    spec = ParamSpec("loss", "cat", ("MSE", "MAE"))
    d = fit_parzen(["MAE"], spec)
    assert score_candidates(["MSE", "MAE"], d, d) == "MSE"


def test_score_prefers_high_ratio_categorical():
    good = ParzenDensity(kind="categorical", labels=("A", "B"), probs=np.array([0.9, 0.1]))
    bad = ParzenDensity(kind="categorical", labels=("A", "B"), probs=np.array([0.1, 0.9]))
    assert score_candidates(["B", "A"], good, bad) == "A"


def test_score_matches_direct_ratio_enumeration():
    spec = ParamSpec("dropout", "float", lo=0.1, hi=0.6)
    rng = np.random.default_rng(21)
    for _ in range(20):
        good = fit_parzen(rng.uniform(0.1, 0.6, 5).tolist(), spec)
        bad = fit_parzen(rng.uniform(0.1, 0.6, 8).tolist(), spec)
        candidates = rng.uniform(0.1, 0.6, 24).tolist()
        picked = score_candidates(candidates, good, bad)
        ratios = [good.pdf([c])[0] / bad.pdf([c])[0] for c in candidates]
        assert picked == candidates[int(np.argmax(ratios))]


def test_score_requires_candidates():
    spec = ParamSpec("loss", "cat", ("MSE", "MAE"))
    d = fit_parzen([], spec)
    with pytest.raises(ValueError):
        score_candidates([], d, d)


# ---------------------------------------------------------------- suggest / report


def test_suggest_on_empty_history_validates():
    space = builtin_space()
    h = TrialHistory()
    tid, config = suggest(h, space, TpeConfig(), np.random.default_rng(0))
    assert tid == 0
    assert validate_config(space, config) == []
    assert h.trials[0].status == "pending"


def test_suggest_ids_are_distinct_without_report():
    space = builtin_space()
    h = TrialHistory()
    rng = np.random.default_rng(0)
    ids = [suggest(h, space, TpeConfig(), rng)[0] for _ in range(5)]
    assert ids == [0, 1, 2, 3, 4]


def test_good_branch_dominates_suggestions():
    # 20 cheap DT trials vs 20 expensive CO trials: DT should win >= 90/100
    space = subspace(builtin_space(), ["DT", "CO"])
    h = TrialHistory()
    for i in range(20):
        h.trials.append(_completed(i, "DT", {"criterion": "MSE", "min_sample_split": 5 + i}, 0.1))
    for i in range(20, 40):
        h.trials.append(_completed(i, "CO", {"n_states": 2 + i % 3}, 100.0))
    h.next_id = 40
    rng = np.random.default_rng(17)
    cfg = TpeConfig()
    picked = [suggest(h, space, cfg, rng)[1].method for _ in range(100)]
    assert picked.count("DT") >= 90


def test_suggested_configs_validate_after_startup():
    space = builtin_space()
    h = TrialHistory()
    cfg = TpeConfig(n_startup=5)
    rng = np.random.default_rng(2)
    for i in range(40):
        tid, config = suggest(h, space, cfg, rng)
        assert validate_config(space, config) == []
        report(h, tid, float(i % 7))


def test_report_completes_and_fails_trials():
    h = TrialHistory()
    space = builtin_space()
    rng = np.random.default_rng(0)
    t0, _ = suggest(h, space, TpeConfig(), rng)
    t1, _ = suggest(h, space, TpeConfig(), rng)
    t2, _ = suggest(h, space, TpeConfig(), rng)
    report(h, t0, 3.2)
    assert h.get(t0).status == "completed" and h.get(t0).loss == 3.2
    report(h, t1, None)
    assert h.get(t1).status == "failed" and h.get(t1).loss is None
    report(h, t2, float("nan"))
    assert h.get(t2).status == "failed"


def test_report_rejects_double_and_unknown():
    h = TrialHistory()
    tid, _ = suggest(h, builtin_space(), TpeConfig(), np.random.default_rng(0))
    report(h, tid, 1.0)
    with pytest.raises(ValueError):
        report(h, tid, 2.0)
    with pytest.raises(KeyError):
        report(h, 999, 1.0)


def test_best_breaks_loss_ties_by_id():
    h = _dt_history([2.0, 1.0, 1.0])
    assert h.best().id == 1


# ---------------------------------------------------------------- optimization runs


def _quadratic(config):
    return float((config.assignments["min_sample_split"] - 50) ** 2)


def test_constant_objective_completes_budget():
    best, h = run_optimization(lambda c: 1.0, builtin_space(), TpeConfig(seed=0), budget=5)
    assert best.loss == 1.0
    assert len(h.completed()) == 5


def test_quadratic_search_lands_near_optimum():
    space = subspace(builtin_space(), ["DT"])
    best, _ = run_optimization(_quadratic, space, TpeConfig(seed=0), budget=60)
    assert 35 <= best.config.assignments["min_sample_split"] <= 65


def test_tpe_median_beats_random_median():
    space = subspace(builtin_space(), ["DT"])
    budget = 50
    tpe_best, rand_best = [], []
    for seed in range(20):
        best, _ = run_optimization(_quadratic, space, TpeConfig(seed=seed), budget)
        tpe_best.append(best.loss)
        # startup beyond the budget never leaves prior sampling
        best, _ = run_optimization(_quadratic, space, TpeConfig(seed=seed, n_startup=budget + 1), budget)
        rand_best.append(best.loss)
    assert np.median(tpe_best) <= np.median(rand_best)


def test_best_so_far_is_monotone():
    space = subspace(builtin_space(), ["DT"])
    _, h = run_optimization(_quadratic, space, TpeConfig(seed=4), budget=30)
    best_so_far = np.inf
    for t in h.trials:
        assert t.status == "completed"
        best_so_far = min(best_so_far, t.loss)
    assert best_so_far == h.best().loss


def test_objective_exceptions_become_failed_trials():
    def flaky(config):
        if config.method == "CO":
            raise RuntimeError("boom")
        return 1.0

    space = subspace(builtin_space(), ["DT", "CO"])
    best, h = run_optimization(flaky, space, TpeConfig(seed=1), budget=20)
    statuses = {t.status for t in h.trials}
    assert best.loss == 1.0
    assert "failed" in statuses and "completed" in statuses


def test_all_failures_raise():
    def broken(config):
        raise RuntimeError("always")

    with pytest.raises(RuntimeError, match="every trial failed"):
        run_optimization(broken, builtin_space(), TpeConfig(seed=0), budget=3)


def test_bad_budget_rejected():
    with pytest.raises(ValueError):
        run_optimization(lambda c: 1.0, builtin_space(), TpeConfig(), budget=0)


def test_sequential_runs_are_deterministic():
    space = subspace(builtin_space(), ["DT"])
    cfg = TpeConfig(seed=13)
    _, h1 = run_optimization(_quadratic, space, cfg, budget=25)
    _, h2 = run_optimization(_quadratic, space, TpeConfig(seed=13), budget=25)
    doc1 = json.dumps(run_report(h1, cfg, 25), sort_keys=True)
    doc2 = json.dumps(run_report(h2, cfg, 25), sort_keys=True)
    assert doc1 == doc2


def test_concurrent_workers_complete_all_trials():
    best, h = run_optimization(lambda c: 2.5, builtin_space(), TpeConfig(seed=0),
                               budget=8, workers=4)
    assert len(h.trials) == 8
    assert all(t.status == "completed" for t in h.trials)
    assert best.loss == 2.5


# ---------------------------------------------------------------- reports


def test_run_report_shape_and_timing_gate(tmp_path):
    space = subspace(builtin_space(), ["DT"])
    cfg = TpeConfig(seed=3)
    _, h = run_optimization(_quadratic, space, cfg, budget=4)
    doc = run_report(h, cfg, 4)
    assert set(doc) == {"best", "trials", "seed", "gamma", "budget"}
    assert doc["budget"] == 4 and doc["seed"] == 3
    assert len(doc["trials"]) == 4
    for t in doc["trials"]:
        assert set(t) == {"id", "method", "assignments", "loss", "status", "wall_ms"}
        assert t["wall_ms"] is None
    timed = run_report(h, cfg, 4, include_timing=True)
    assert all(t["wall_ms"] is not None for t in timed["trials"])

    path = tmp_path / "report.json"
    write_run_report(path, h, cfg, 4)
    assert json.loads(path.read_text()) == json.loads(json.dumps(doc, sort_keys=True))


def test_tpe_config_validation():
    with pytest.raises(ValueError):
        TpeConfig(gamma=0.0)
    with pytest.raises(ValueError):
        TpeConfig(gamma=1.0)
    with pytest.raises(ValueError):
        TpeConfig(n_candidates=0)
    with pytest.raises(ValueError):
        TpeConfig(prior_weight=0.0)
