"""
Monte-Carlo benchmark: simulation models I-V, true densities, MISE and
replicated comparisons of KDE (Sheather-Jones) against SHIDE.

Every replication draws its data from a generator seeded by a SplitMix64 mix
of (base seed, model, n, replication, stream); stream 0 feeds the data and
stream 1 the SHIDE pseudo-noise, so methods never touch the data stream.
"""

import json
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .bandwidth import AmiseBandwidth, PercentileBandwidth
from .baseline import additive_kde, binned_kde_grid, sj_bw, sj_bw_binned
from .config import KDE_REFERENCES
from .estimator import ShideConfig, SupportSpec, shide_estimate

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MODEL_IDS = ("I", "II", "III", "IV", "V")
METHOD_IDS = ("KDE_SJ", "SHIDE_opt", "SHIDE_perc")

# KDE_SJ scoring: R-style binned selector and grid evaluation, or the exact ones

# CSV (method, selector) columns per benchmark method id
METHOD_COLUMNS = {
    "KDE_SJ": ("KDE", "SJ"),
    "SHIDE_opt": ("SHIDE", "opt"),
    "SHIDE_perc": ("SHIDE", "perc"),
}

DATA_STREAM = 0
NOISE_STREAM = 1

MASK64 = (1 << 64) - 1

# Model II mixture: weight, (mean, sd) of the first and second components
MIXTURE_WEIGHT = 0.35
MIXTURE_COMPONENTS = ((-1.0, 1.0), (2.0, 2.0))

TRUNCATION = (-1.0, 0.5)


@dataclass(frozen=True)
class ModelSpec:
    """Simulation model with its SHIDE support."""

    id: str
    description: str
    support: SupportSpec
    sigma: float = 1.0

    @property
    def index(self) -> int:
        return MODEL_IDS.index(self.id)


def get_model(model_id: str, model5_sigma: float = 3.0) -> ModelSpec:
    """Look up a model by its roman-numeral id.

    Raises:
        ValueError: For an unknown id or a nonpositive model V sigma
    """
    key = str(model_id).strip().upper()
    if key == "I":
        return ModelSpec("I", "N(0, 1)", SupportSpec())
    if key == "II":
        return ModelSpec("II", "0.35 N(-1, 1) + 0.65 N(2, 2)", SupportSpec())
    if key == "III":
        return ModelSpec("III", "Cauchy(0, 1)", SupportSpec())
    if key == "IV":
        return ModelSpec("IV", "Exponential(1)", SupportSpec.lower_bounded(0.0))
    if key == "V":
        if not model5_sigma > 0:
            raise ValueError(f"Model V sigma must be positive, got {model5_sigma}")
        return ModelSpec("V", f"N(0, {model5_sigma:g}) truncated to (-1, 0.5)",
                         SupportSpec.interval(*TRUNCATION), sigma=float(model5_sigma))
    raise ValueError(f"unknown model {model_id!r} (expected one of {', '.join(MODEL_IDS)})")


def _truncated_normal_rejection(sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    lower, upper = TRUNCATION
    accept_rate = stats.norm.cdf(upper / sigma) - stats.norm.cdf(lower / sigma)
    accepted = []
    remaining = n
    while remaining > 0:
        batch = rng.normal(0.0, sigma, size=int(np.ceil(1.2 * remaining / accept_rate)) + 16)
        kept = batch[(batch > lower) & (batch < upper)][:remaining]
        accepted.append(kept)
        remaining -= kept.size
    return np.concatenate(accepted)


def model_sample(model: ModelSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. observations from a model.

    Args:
        model: Simulation model
        n: Sample size (>= 1)
        rng: Caller-owned generator

    Returns:
        Array of n draws
    """
    if n < 1:
        raise ValueError(f"Sample size must be at least 1, got {n}")

    if model.id == "I":
        return rng.standard_normal(n)
    if model.id == "II":
        first = rng.random(n) < MIXTURE_WEIGHT
        (mean_a, sd_a), (mean_b, sd_b) = MIXTURE_COMPONENTS
        return np.where(first, rng.normal(mean_a, sd_a, n), rng.normal(mean_b, sd_b, n))
    if model.id == "III":
        return rng.standard_cauchy(n)
    if model.id == "IV":
        return rng.exponential(1.0, n)
    return _truncated_normal_rejection(model.sigma, n, rng)


def model_pdf(model: ModelSpec, x: ArrayLike) -> ArrayLike:
    """Exact density of a model."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)

    if model.id == "I":
        density = stats.norm.pdf(x)
    elif model.id == "II":
        (mean_a, sd_a), (mean_b, sd_b) = MIXTURE_COMPONENTS
        density = (MIXTURE_WEIGHT * stats.norm.pdf(x, mean_a, sd_a)
                   + (1.0 - MIXTURE_WEIGHT) * stats.norm.pdf(x, mean_b, sd_b))
    elif model.id == "III":
        density = stats.cauchy.pdf(x)
    elif model.id == "IV":
        density = stats.expon.pdf(x)
    else:
        lower, upper = TRUNCATION
        sigma = model.sigma
        inside = (x > lower) & (x < upper)
        density = np.where(inside, stats.truncnorm.pdf(x, lower / sigma, upper / sigma, scale=sigma), 0.0)

    return float(density) if scalar else np.asarray(density, dtype=float)


def mise(estimate_values, truth_values, grid) -> float:
    """Composite trapezoid integral of (estimate - truth)^2 over a uniform grid.

    Raises:
        ValueError: On length mismatch, fewer than 2 points, or a non-uniform grid
    """
    estimate_values = np.asarray(estimate_values, dtype=float)
    truth_values = np.asarray(truth_values, dtype=float)
    grid = np.asarray(grid, dtype=float)

    if not (estimate_values.shape == truth_values.shape == grid.shape):
        raise ValueError(
            f"Length mismatch: {estimate_values.size} estimates, {truth_values.size} truths, {grid.size} grid points"
        )
    if grid.size < 2:
        raise ValueError(f"MISE needs at least 2 grid points, got {grid.size}")
    steps = np.diff(grid)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=8.0 * np.finfo(float).eps * np.max(np.abs(grid))):
        raise ValueError("MISE grid must be uniform")

    return float(trapezoid((estimate_values - truth_values) ** 2, grid))


def median_mad(values) -> tuple[float, float]:
    """Median and median absolute deviation (no consistency factor)."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("median_mad of an empty sequence")
    center = float(np.median(values))
    return center, float(np.median(np.abs(values - center)))


def splitmix64(state: int) -> int:
    """One SplitMix64 output for a 64-bit state."""
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replication_seed(base_seed: int, model_id: str, n: int, rep: int, stream: int = DATA_STREAM) -> int:
    """64-bit seed for one (model, n, replication, stream) cell.

    Folds each coordinate into the state with XOR followed by a SplitMix64 step.
    """
    if not 0 <= base_seed <= MASK64:
        raise ValueError(f"Seed must be an unsigned 64-bit integer, got {base_seed}")
    state = base_seed
    for part in (MODEL_IDS.index(model_id) + 1, n, rep, stream):
        state = splitmix64(state ^ (part & MASK64))
    return state


def evaluation_grid(data, h: float, points: int = 512, pad: float = 3.0) -> np.ndarray:
    """Uniform grid over [min(data) - pad h, max(data) + pad h]."""
    data = np.asarray(data, dtype=float)
    return np.linspace(data.min() - pad * h, data.max() + pad * h, points)


@dataclass(frozen=True)
class BenchSettings:
    """Estimator and evaluation settings shared by every replication."""

    k: int = 3
    m: int = 10
    c: float = 1.0
    alpha: float = 0.5
    roughness_method: str = "exact"
    working_scale: str = "original"
    psi_method: str = "normal_sd"
    pilot_location: str = "spacing"
    bin_rule: str = "sturges"
    model5_sigma: float = 3.0
    grid_points: int = 512
    window_pad: float = 3.0
    kde_reference: str = "binned"

    def __post_init__(self):
        if self.kde_reference not in KDE_REFERENCES:
            raise ValueError(f"Unknown KDE reference {self.kde_reference!r}, expected one of {KDE_REFERENCES}")


@dataclass(frozen=True)
class BenchmarkRecord:
    """Replicated MISE values for one (model, n, method) cell."""

    model: str
    n: int
    method: str
    replication_mises: tuple[float, ...]
    median: float
    mad: float
    fingerprint: str

    @property
    def columns(self) -> tuple[str, str]:
        return METHOD_COLUMNS[self.method]


def config_fingerprint(models: Sequence[str], sizes: Sequence[int], reps: int, base_seed: int,
                       methods: Sequence[str], settings: BenchSettings) -> str:
    """SHA-256 of the canonical JSON form of a benchmark configuration."""
    payload = {
        "models": list(models),
        "sizes": list(sizes),
        "reps": reps,
        "seed": base_seed,
        "methods": list(methods),
        "settings": asdict(settings),
        "window": "data range padded by window_pad * h (per method)",
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _shide_config(settings: BenchSettings, model: ModelSpec, method: str, noise_seed: int) -> ShideConfig:
    if method == "SHIDE_opt":
        rule = AmiseBandwidth(c=settings.c, psi_method=settings.psi_method,
                              roughness_method=settings.roughness_method)
    else:
        rule = PercentileBandwidth(alpha=settings.alpha, calibrated=True, c=settings.c,
                                   psi_method=settings.psi_method, roughness_method=settings.roughness_method,
                                   pilot_location=settings.pilot_location)
    return ShideConfig(k=settings.k, m=settings.m, bandwidth=rule, support=model.support, seed=noise_seed,
                       grid_points=settings.grid_points, working_scale=settings.working_scale,
                       bin_rule=settings.bin_rule)


def _method_mise(method: str, data: np.ndarray, model: ModelSpec, settings: BenchSettings,
                 noise_seed: int) -> float:
    if method == "KDE_SJ" and settings.kde_reference == "binned":
        h = sj_bw_binned(data)
        grid = evaluation_grid(data, h, settings.grid_points, settings.window_pad)
        return mise(binned_kde_grid(data, h, grid), model_pdf(model, grid), grid)

    if method == "KDE_SJ":
        h = sj_bw(data)
        estimate = additive_kde(data, h)
    else:
        estimate = shide_estimate(data, _shide_config(settings, model, method, noise_seed))
        h = estimate.h_used

    grid = evaluation_grid(data, h, settings.grid_points, settings.window_pad)
    return mise(estimate.evaluate(grid), model_pdf(model, grid), grid)


@dataclass(frozen=True)
class _ReplicationTask:
    model: str
    n: int
    rep: int
    base_seed: int
    methods: tuple[str, ...]
    settings: BenchSettings = field(default_factory=BenchSettings)


def _run_replication(task: _ReplicationTask) -> dict[str, float]:
    """Fit every method on one replication's data. Top-level so worker processes can pickle it."""
    model = get_model(task.model, task.settings.model5_sigma)
    data_rng = np.random.default_rng(replication_seed(task.base_seed, task.model, task.n, task.rep, DATA_STREAM))
    data = model_sample(model, task.n, data_rng)
    noise_seed = replication_seed(task.base_seed, task.model, task.n, task.rep, NOISE_STREAM)
    return {method: _method_mise(method, data, model, task.settings, noise_seed) for method in task.methods}


def _canonical(values: Iterable[str], known: Sequence[str], kind: str) -> list[str]:
    requested = []
    for value in values:
        key = str(value).strip()
        match = next((item for item in known if item.upper() == key.upper()), None)
        if match is None:
            raise ValueError(f"unknown {kind} {value!r} (expected one of {', '.join(known)})")
        if match not in requested:
            requested.append(match)
    if not requested:
        raise ValueError(f"No {kind}s requested")
    return sorted(requested, key=known.index)


def run_benchmark(
    models: Iterable[str],
    sizes: Iterable[int],
    reps: int,
    base_seed: int = 0,
    methods: Optional[Iterable[str]] = None,
    settings: Optional[BenchSettings] = None,
    jobs: int = 1,
) -> list[BenchmarkRecord]:
    """Replicated MISE comparison.

    Args:
        models: Model ids (I..V)
        sizes: Sample sizes
        reps: Replications per (model, n)
        base_seed: Unsigned 64-bit base seed
        methods: Subset of KDE_SJ, SHIDE_opt, SHIDE_perc (default all)
        settings: Estimator/evaluation settings
        jobs: Worker processes (1 runs in-process)

    Returns:
        Records ordered by (model, n, method), identical for any jobs value
    """
    if reps < 1:
        raise ValueError(f"reps must be at least 1, got {reps}")
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")

    settings = settings or BenchSettings()
    model_ids = _canonical(models, MODEL_IDS, "model")
    method_ids = _canonical(methods if methods is not None else METHOD_IDS, METHOD_IDS, "method")
    size_list = sorted({int(n) for n in sizes})
    if not size_list or size_list[0] < 2:
        raise ValueError(f"Sample sizes must be at least 2, got {size_list}")
    get_model("V", settings.model5_sigma)

    fingerprint = config_fingerprint(model_ids, size_list, reps, base_seed, method_ids, settings)
    tasks = [
        _ReplicationTask(model_id, n, rep, base_seed, tuple(method_ids), settings)
        for model_id in model_ids
        for n in size_list
        for rep in range(reps)
    ]
    logger.info(f"Running {len(tasks)} replications ({len(method_ids)} methods each) with {jobs} worker(s)")

    if jobs == 1:
        results = [_run_replication(task) for task in tasks]
    else:
        # map() yields in submission order, so the merge is deterministic
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_run_replication, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))

    records = []
    for model_id in model_ids:
        for n in size_list:
            cell = [result for task, result in zip(tasks, results) if task.model == model_id and task.n == n]
            for method in method_ids:
                values = tuple(result[method] for result in cell)
                center, spread = median_mad(values)
                records.append(BenchmarkRecord(model_id, n, method, values, center, spread, fingerprint))
                logger.info(f"✓ model {model_id} n={n} {method}: median MISE {center:.6g} (MAD {spread:.3g})")

    return records
