"""Test the additive and multiplicative KDE baselines."""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid

from shide.baseline import (
    additive_kde,
    binned_kde_grid,
    kde_evaluate,
    mkde_evaluate,
    multiplicative_kde,
    silverman_bw,
    sj_bw,
    sj_bw_binned,
)
from shide.bench import evaluation_grid, get_model, model_sample


def test_kde_single_point():
    est = additive_kde([0.0], 1.0)
    assert abs(kde_evaluate(est, 0.0) - stats.norm.pdf(0.0)) < 1e-15
    assert abs(est.evaluate(2.0) - stats.norm.pdf(2.0)) < 1e-15
    with pytest.raises(ValueError):
        additive_kde([0.0], 0.0)
    with pytest.raises(ValueError):
        additive_kde([], 1.0)
    print("✓ Single-point KDE: PASS")


def test_kde_integrates_to_one():
    data = np.random.default_rng(40).normal(size=100)
    h = silverman_bw(data)
    est = additive_kde(data, h)
    grid = np.linspace(data.min() - 8 * h, data.max() + 8 * h, 4001)
    assert abs(trapezoid(est.evaluate(grid), grid) - 1.0) < 1e-4
    print("✓ KDE normalization: PASS")


def test_kde_chunked_evaluation():
    data = np.random.default_rng(41).normal(size=50)
    est = additive_kde(data, 0.4)
    grid = np.linspace(-4, 4, 5000)
    direct = stats.norm.pdf((grid[:, None] - data[None, :]) / 0.4).sum(axis=1) / (50 * 0.4)
    assert np.allclose(est.evaluate(grid), direct, rtol=1e-12, atol=1e-15)
    print("✓ Chunked KDE evaluation: PASS")


def test_silverman_formula_and_equivariance():
    data = np.random.default_rng(42).gamma(2.0, size=300)
    q75, q25 = np.percentile(data, [75, 25])
    expected = 0.9 * min(np.std(data, ddof=1), (q75 - q25) / 1.34) * 300 ** -0.2
    assert abs(silverman_bw(data) - expected) < 1e-14

    assert abs(silverman_bw(-3.0 * data + 5.0) / silverman_bw(data) - 3.0) < 1e-12
    with pytest.raises(ValueError):
        silverman_bw([1.0])
    with pytest.raises(ValueError):
        silverman_bw([2.0, 2.0, 2.0])
    print("✓ Silverman bandwidth: PASS")


def test_sj_close_to_silverman_on_normal_data():
    data = np.random.default_rng(43).normal(size=500)
    ratio = sj_bw(data) / silverman_bw(data)
    assert 0.75 <= ratio <= 1.33, f"SJ / Silverman = {ratio}"
    print(f"✓ Sheather-Jones vs Silverman (ratio {ratio:.3f}): PASS")


def test_sj_scale_equivariance():
    data = np.random.default_rng(44).normal(size=200)
    for factor in (4.0, 0.25, 3.0):
        ratio = sj_bw(factor * data) / sj_bw(data)
        assert abs(ratio / factor - 1.0) < 1e-10, f"factor {factor}: ratio {ratio}"
    assert abs(sj_bw(data + 7.0) / sj_bw(data) - 1.0) < 1e-10
    with pytest.raises(ValueError):
        sj_bw([1.0, 2.0])
    with pytest.raises(ValueError):
        sj_bw([4.0, 4.0, 4.0, 4.0])
    print("✓ Sheather-Jones equivariance: PASS")


def test_sj_below_silverman_on_bimodal_mixture():
    model = get_model("II")
    below = 0
    for seed in range(30):
        data = model_sample(model, 500, np.random.default_rng(300 + seed))
        below += sj_bw(data) < silverman_bw(data)
    assert below >= 24, f"SJ below Silverman on {below} of 30 samples"
    print(f"✓ Sheather-Jones below Silverman on the mixture ({below}/30): PASS")


def test_kde_mirror_symmetry():
    rng = np.random.default_rng(47)
    data = rng.gamma(2.0, size=150) - 1.0
    x = np.linspace(-6.0, 8.0, 701)
    h = silverman_bw(data)
    original = additive_kde(data, h).evaluate(x)
    mirrored = additive_kde(-data, h).evaluate(-x)
    assert np.max(np.abs(mirrored - original)) <= 1e-15 * np.max(original)
    assert silverman_bw(-data) == pytest.approx(h, rel=1e-14)
    print("✓ KDE mirror symmetry: PASS")


def test_binned_sj_matches_exact_on_normal_data():
    data = np.random.default_rng(48).normal(size=500)
    ratio = sj_bw_binned(data) / sj_bw(data)
    assert 0.9 <= ratio <= 1.1, f"binned / exact SJ = {ratio}"

    # Bin indices truncate x / d, so only power-of-two scalings keep the binning identical
    for factor in (4.0, 0.25):
        scaled = sj_bw_binned(factor * data) / sj_bw_binned(data)
        assert abs(scaled / factor - 1.0) < 1e-10, f"factor {factor}: ratio {scaled}"

    with pytest.raises(ValueError):
        sj_bw_binned([1.0, 2.0])
    with pytest.raises(ValueError):
        sj_bw_binned([3.0, 3.0, 3.0])
    with pytest.raises(ValueError):
        sj_bw_binned(data, nb=1)
    print(f"✓ Binned Sheather-Jones (ratio to exact {ratio:.3f}): PASS")


def test_binned_kde_grid_matches_direct_sum():
    data = np.random.default_rng(49).normal(size=200)
    h = 0.5
    grid = evaluation_grid(data, h, 512, 3.0)
    binned = binned_kde_grid(data, h, grid)
    direct = additive_kde(data, h).evaluate(grid)
    assert np.all(binned >= 0.0)
    assert np.max(np.abs(binned - direct)) < 2e-3, f"max gap {np.max(np.abs(binned - direct))}"
    assert abs(trapezoid(binned, grid) - 1.0) < 1e-3

    with pytest.raises(ValueError):
        binned_kde_grid(data, 0.0, grid)
    with pytest.raises(ValueError):
        binned_kde_grid(data, h, grid[:1])
    print("✓ Binned grid KDE: PASS")


def test_binned_kde_grid_spikes_below_grid_step():
    data = np.arange(5.0)
    h = 1e-3
    grid = evaluation_grid(data, h, 512, 3.0)
    step = grid[1] - grid[0]
    assert h < step / 5

    binned = binned_kde_grid(data, h, grid)
    # Each binned point mass is read back at height phi(0) / h over a whole grid step
    mass = trapezoid(binned, grid)
    assert mass > 2.0, f"binned mass {mass}"
    print(f"✓ Binned grid KDE spikes (mass {mass:.2f}): PASS")


def _half_line_mass(est, data: np.ndarray) -> float:
    """Integral over the data's half-line by trapezoid in log|x|."""
    scales = est.h * np.abs(data)
    t = np.linspace(np.log(scales.min()) - 12.0, np.log(scales.max()) + 3.0, 20001)
    x = np.sign(data[0]) * np.exp(t)
    return float(trapezoid(est.evaluate(x) * np.exp(t), t))


def test_mkde_integrates_to_one():
    data = np.random.default_rng(45).uniform(0.5, 2.0, 200)
    est = multiplicative_kde(data, 0.3)
    assert est.kernel == "half_normal" and est.sign_domain == "positive"
    grid = np.linspace(1e-9, 10.0, 20001)
    mass = trapezoid(est.evaluate(grid), grid)
    assert abs(mass - 1.0) < 1e-3, f"mass {mass}"
    assert est.evaluate(-1.0) == 0.0 and est.evaluate(0.0) == 0.0

    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(500 + seed)
        n = int(rng.integers(5, 101))
        data = rng.lognormal(rng.uniform(-2.0, 2.0), rng.uniform(0.2, 1.5), n)
        h = rng.uniform(0.05, 1.0)
        worst = max(worst, abs(_half_line_mass(multiplicative_kde(data, h), data) - 1.0))
    assert worst < 1e-3, f"worst mass error {worst}"
    print(f"✓ Multiplicative KDE normalization (worst of 100: {worst:.1e}): PASS")


def test_mkde_sign_flip():
    data = np.random.default_rng(46).exponential(1.0, 80) + 0.01
    positive = multiplicative_kde(data, 0.25)
    negative = multiplicative_kde(-data, 0.25)
    assert negative.sign_domain == "negative"

    t = np.linspace(0.01, 6.0, 300)
    assert np.allclose(mkde_evaluate(negative, -t), mkde_evaluate(positive, t), rtol=1e-15, atol=0)
    assert np.all(negative.evaluate(t) == 0.0)

    for seed in range(100):
        rng = np.random.default_rng(700 + seed)
        data = rng.gamma(rng.uniform(0.5, 4.0), size=int(rng.integers(5, 101))) + 1e-3
        h = rng.uniform(0.05, 1.0)
        t = np.geomspace(1e-3, 20.0, 200)
        gap = np.abs(multiplicative_kde(-data, h).evaluate(-t) - multiplicative_kde(data, h).evaluate(t))
        assert np.max(gap) <= 1e-12, f"seed {seed}: gap {np.max(gap)}"
        assert abs(_half_line_mass(multiplicative_kde(-data, h), -data) - 1.0) < 1e-3
    print("✓ Multiplicative KDE sign flip: PASS")


def test_mkde_gaussian_kernel():
    est = multiplicative_kde([1.0], 1.0, kernel="gaussian")
    assert abs(est.evaluate(1.0) - stats.norm.pdf(1.0)) < 1e-15
    assert abs(est.evaluate(1.0) - 0.24197) < 1e-5
    # Only half of the Gaussian mass lies on the data's half-line
    grid = np.linspace(1e-12, 12.0, 24001)
    assert abs(trapezoid(est.evaluate(grid), grid) - 0.5) < 1e-4
    print("✓ Multiplicative KDE with the full Gaussian kernel: PASS")


def test_mkde_errors():
    with pytest.raises(ValueError) as excinfo:
        multiplicative_kde([-1.0, 2.0], 0.5)
    assert "single strict sign" in str(excinfo.value)
    with pytest.raises(ValueError):
        multiplicative_kde([0.0, 1.0], 0.5)
    with pytest.raises(ValueError):
        multiplicative_kde([1.0, 2.0], 0.5, kernel="epanechnikov")
    print("✓ Multiplicative KDE errors: PASS")


if __name__ == "__main__":
    print("Testing KDE baselines...\n")

    test_kde_single_point()
    test_kde_integrates_to_one()
    test_kde_chunked_evaluation()
    test_silverman_formula_and_equivariance()
    test_sj_close_to_silverman_on_normal_data()
    test_sj_scale_equivariance()
    test_sj_below_silverman_on_bimodal_mixture()
    test_kde_mirror_symmetry()
    print()
    test_binned_sj_matches_exact_on_normal_data()
    test_binned_kde_grid_matches_direct_sum()
    test_binned_kde_grid_spikes_below_grid_step()
    print()
    test_mkde_integrates_to_one()
    test_mkde_sign_flip()
    test_mkde_gaussian_kernel()
    test_mkde_errors()

    print("\n✅ All tests passed!")
