"""Test the simulation models, MISE and the replicated benchmark."""

import math
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from shide.bench import (
    DATA_STREAM,
    MASK64,
    MODEL_IDS,
    NOISE_STREAM,
    BenchSettings,
    config_fingerprint,
    evaluation_grid,
    get_model,
    median_mad,
    mise,
    model_pdf,
    model_sample,
    replication_seed,
    run_benchmark,
    splitmix64,
)


def test_model_pdf_values():
    assert abs(model_pdf(get_model("I"), 0.0) - 1 / math.sqrt(2 * math.pi)) < 1e-15
    expected = 0.35 * stats.norm.pdf(0.0, -1.0, 1.0) + 0.65 * stats.norm.pdf(0.0, 2.0, 2.0)
    assert abs(model_pdf(get_model("II"), 0.0) - expected) < 1e-15
    assert abs(model_pdf(get_model("III"), 0.0) - 1 / math.pi) < 1e-15
    assert model_pdf(get_model("IV"), -1.0) == 0.0
    assert abs(model_pdf(get_model("IV"), 0.5) - math.exp(-0.5)) < 1e-15

    model = get_model("V")
    mass = stats.norm.cdf(0.5 / 3.0) - stats.norm.cdf(-1.0 / 3.0)
    assert abs(model_pdf(model, 0.0) - stats.norm.pdf(0.0, 0.0, 3.0) / mass) < 1e-12
    assert model_pdf(model, -1.0) == 0.0 and model_pdf(model, 0.5) == 0.0 and model_pdf(model, 2.0) == 0.0
    print("✓ Model densities: PASS")


def test_model_five_integrates_to_one():
    for sigma in (3.0, 0.5):
        model = get_model("V", model5_sigma=sigma)
        total, _ = quad(lambda x: model_pdf(model, x), -1.0, 0.5, epsabs=1e-13, epsrel=1e-13)
        assert abs(total - 1.0) < 1e-8, f"sigma={sigma}: {total}"
    print("✓ Model V normalization: PASS")


def test_get_model():
    assert get_model("iv").id == "IV"
    assert get_model("IV").support.kind == "lower"
    assert get_model("V").support.describe() == "(-1, 0.5)"
    assert get_model("II").support.is_unbounded
    with pytest.raises(ValueError) as excinfo:
        get_model("VI")
    assert "unknown model" in str(excinfo.value)
    with pytest.raises(ValueError):
        get_model("V", model5_sigma=0.0)
    print("✓ get_model: PASS")


def test_model_samples():
    rng = np.random.default_rng(60)
    count = 100_000
    assert abs(model_sample(get_model("I"), count, rng).mean()) < 0.02
    assert abs(model_sample(get_model("II"), count, rng).mean() - 0.95) < 0.035
    assert abs(np.median(model_sample(get_model("III"), count, rng))) < 0.03
    exp_draws = model_sample(get_model("IV"), count, rng)
    assert np.all(exp_draws >= 0) and abs(exp_draws.mean() - 1.0) < 0.02

    model = get_model("V")
    draws = model_sample(model, count, rng)
    assert draws.size == count and np.all((draws > -1.0) & (draws < 0.5))
    true_mean = stats.truncnorm.mean(-1.0 / 3.0, 0.5 / 3.0, scale=3.0)
    assert abs(draws.mean() - true_mean) < 0.01

    with pytest.raises(ValueError):
        model_sample(get_model("I"), 0, rng)
    print("✓ Model samples: PASS")


def test_mise_values():
    assert mise([1.0, 1.0], [0.0, 0.0], [0.0, 1.0]) == 1.0
    assert mise(np.zeros(5), np.zeros(5), np.linspace(0, 1, 5)) == 0.0
    assert abs(mise([0.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.5, 1.0]) - 2.0) < 1e-15
    with pytest.raises(ValueError):
        mise([1.0, 2.0], [1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        mise([1.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        mise([1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 1.0, 3.0])
    print("✓ MISE values: PASS")


def test_median_mad():
    assert median_mad([1.0, 2.0, 3.0, 4.0, 100.0]) == (3.0, 1.0)
    assert median_mad([5.0]) == (5.0, 0.0)
    assert median_mad([1.0, 2.0, 3.0, 4.0]) == (2.5, 1.0)
    with pytest.raises(ValueError):
        median_mad([])
    print("✓ median_mad: PASS")


def test_splitmix64():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert 0 <= splitmix64(MASK64) <= MASK64
    print("✓ SplitMix64: PASS")


def test_replication_seed():
    seed = replication_seed(42, "II", 50, 7, DATA_STREAM)
    assert seed == replication_seed(42, "II", 50, 7, DATA_STREAM)
    assert 0 <= seed <= MASK64

    others = {
        replication_seed(42, "II", 50, 7, NOISE_STREAM),
        replication_seed(42, "II", 50, 8, DATA_STREAM),
        replication_seed(42, "II", 500, 7, DATA_STREAM),
        replication_seed(42, "III", 50, 7, DATA_STREAM),
        replication_seed(43, "II", 50, 7, DATA_STREAM),
    }
    assert seed not in others and len(others) == 5

    with pytest.raises(ValueError):
        replication_seed(-1, "I", 50, 0)
    with pytest.raises(ValueError):
        replication_seed(MASK64 + 1, "I", 50, 0)
    print("✓ Replication seeds: PASS")


def test_evaluation_grid():
    grid = evaluation_grid([0.0, 2.0, 1.0], 0.5)
    assert grid.size == 512 and grid[0] == -1.5 and grid[-1] == 3.5
    assert np.allclose(evaluation_grid([0.0, 1.0], 1.0, points=11, pad=0.0), np.linspace(0, 1, 11))
    print("✓ Evaluation grid: PASS")


def test_run_benchmark_structure():
    records = run_benchmark(["iv", "I", "I"], [30], reps=2, base_seed=5)
    assert [(r.model, r.n, r.method) for r in records] == [
        ("I", 30, "KDE_SJ"), ("I", 30, "SHIDE_opt"), ("I", 30, "SHIDE_perc"),
        ("IV", 30, "KDE_SJ"), ("IV", 30, "SHIDE_opt"), ("IV", 30, "SHIDE_perc"),
    ]
    for record in records:
        assert len(record.replication_mises) == 2
        assert all(np.isfinite(v) and v >= 0 for v in record.replication_mises)
        assert (record.median, record.mad) == median_mad(record.replication_mises)
    assert records[0].columns == ("KDE", "SJ") and records[2].columns == ("SHIDE", "perc")
    assert len({r.fingerprint for r in records}) == 1
    print("✓ Benchmark structure: PASS")


def test_run_benchmark_deterministic():
    first = run_benchmark(["II"], [40], reps=3, base_seed=11)
    second = run_benchmark(["II"], [40], reps=3, base_seed=11)
    assert first == second

    subset = run_benchmark(["II"], [40], reps=3, base_seed=11, methods=["shide_opt"])
    assert subset[0].replication_mises == first[1].replication_mises, "methods must not share the data stream"
    print("✓ Benchmark determinism: PASS")


def test_run_benchmark_jobs_equivalence():
    serial = run_benchmark(["I", "V"], [30], reps=3, base_seed=3, jobs=1)
    parallel = run_benchmark(["I", "V"], [30], reps=3, base_seed=3, jobs=2)
    assert serial == parallel
    print("✓ Serial and parallel runs match: PASS")


def test_run_benchmark_errors():
    for kwargs in ({"models": ["VI"]}, {"reps": 0}, {"sizes": [1]}, {"methods": ["KDE_silverman"]},
                   {"jobs": 0}, {"models": []}):
        args = {"models": ["I"], "sizes": [20], "reps": 1}
        args.update(kwargs)
        with pytest.raises(ValueError):
            run_benchmark(**args)
    print("✓ Benchmark argument errors: PASS")


def test_config_fingerprint():
    base = config_fingerprint(["I"], [50], 10, 0, ["KDE_SJ"], BenchSettings())
    assert base == config_fingerprint(["I"], [50], 10, 0, ["KDE_SJ"], BenchSettings())
    assert len(base) == 64
    assert base != config_fingerprint(["I"], [50], 10, 1, ["KDE_SJ"], BenchSettings())
    assert base != config_fingerprint(["I"], [50], 10, 0, ["KDE_SJ"], BenchSettings(m=20))
    assert base != config_fingerprint(["I"], [50], 10, 0, ["KDE_SJ"], BenchSettings(kde_reference="exact"))
    print("✓ Config fingerprint: PASS")


def test_bench_settings_defaults():
    settings = BenchSettings()
    assert settings.pilot_location == "spacing"
    assert settings.kde_reference == "binned"
    with pytest.raises(ValueError):
        BenchSettings(kde_reference="fft")
    print("✓ Benchmark settings defaults: PASS")


def test_kde_reference_only_changes_kde_column():
    binned = run_benchmark(["III"], [60], reps=2, base_seed=9)
    exact = run_benchmark(["III"], [60], reps=2, base_seed=9, settings=BenchSettings(kde_reference="exact"))
    assert [r.replication_mises for r in binned[1:]] == [r.replication_mises for r in exact[1:]]
    assert binned[0].replication_mises != exact[0].replication_mises
    assert binned[0].fingerprint != exact[0].fingerprint
    print("✓ KDE reference scoring: PASS")


def _medians(records):
    return {(r.model, r.n, r.method): r.median for r in records}


@lru_cache(maxsize=None)
def _study_medians():
    """Median MISE per cell of the full simulation study at 100 replications."""
    return _medians(run_benchmark(MODEL_IDS, [50, 500], reps=100, base_seed=42, jobs=4))


@pytest.mark.slow
def test_simulation_study_orderings():
    medians = _study_medians()

    assert medians[("IV", 500, "KDE_SJ")] >= 3 * medians[("IV", 500, "SHIDE_opt")]
    assert medians[("V", 500, "SHIDE_opt")] < medians[("V", 500, "KDE_SJ")]
    assert medians[("III", 500, "KDE_SJ")] > 1.0, f"model III KDE_SJ {medians[('III', 500, 'KDE_SJ')]}"
    assert medians[("III", 500, "SHIDE_opt")] < 0.5
    for model in ("I", "II"):
        ratio = medians[(model, 500, "SHIDE_opt")] / medians[(model, 500, "KDE_SJ")]
        assert 0.5 <= ratio <= 2.0, f"model {model}: SHIDE_opt / KDE_SJ = {ratio}"
    print("✓ Simulation study orderings: PASS")


@pytest.mark.slow
def test_percentile_rule_tracks_amise_rule():
    medians = _study_medians()
    for model in MODEL_IDS:
        for n in (50, 500):
            opt, perc = medians[(model, n, "SHIDE_opt")], medians[(model, n, "SHIDE_perc")]
            assert abs(opt - perc) / max(opt, perc) < 0.5, f"model {model}, n={n}: {opt} vs {perc}"
    print("✓ Percentile rule within 50% of the AMISE rule in every cell: PASS")


@pytest.mark.slow
def test_mise_decreases_with_n():
    medians = _study_medians()
    for model in ("I", "II", "IV", "V"):
        for method in ("SHIDE_opt", "SHIDE_perc"):
            assert medians[(model, 500, method)] < medians[(model, 50, method)], f"{model} {method}"
    for model in ("I", "II", "V"):
        assert medians[(model, 500, "KDE_SJ")] < medians[(model, 50, "KDE_SJ")], f"{model} KDE_SJ"
    print("✓ MISE decreases from n=50 to n=500: PASS")


if __name__ == "__main__":
    print("Testing the benchmark...\n")

    test_model_pdf_values()
    test_model_five_integrates_to_one()
    test_get_model()
    test_model_samples()
    print()
    test_mise_values()
    test_median_mad()
    test_splitmix64()
    test_replication_seed()
    test_evaluation_grid()
    print()
    test_run_benchmark_structure()
    test_run_benchmark_deterministic()
    test_run_benchmark_jobs_equivalence()
    test_run_benchmark_errors()
    test_config_fingerprint()
    test_bench_settings_defaults()
    test_kde_reference_only_changes_kde_column()
    print()
    test_simulation_study_orderings()
    test_percentile_rule_tracks_amise_rule()
    test_mise_decreases_with_n()

    print("\n✅ All tests passed!")
