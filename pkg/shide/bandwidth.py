"""
Bandwidth selectors for SHIDE.

Two rules pick the noise half-width h: the AMISE-optimal rule and the
nearest-neighbor spacing percentile rule (raw h = d_alpha / 2, or calibrated
h = lambda_n d_alpha so it matches the AMISE target). Both need a pilot for
Psi(f'') = integral of f''(x)^2, and the calibrated rule a pilot density value.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.integrate import trapezoid

from .baseline import additive_kde, silverman_bw
from .config import PSI_METHODS, PILOT_LOCATIONS, ROUGHNESS_METHODS
from .kernel import roughness, sigma_k_sq

logger = logging.getLogger(__name__)

PILOT_FLOOR = 1e-300

# Half-width of the spacing-rank window used by pilot_location="spacing"
SPACING_RANK_WINDOW = 0.05

PSI_GRID_POINTS = 2048


@dataclass(frozen=True)
class SelectorInputs:
    """Constants shared by the AMISE and calibrated percentile rules."""

    n: int
    k: int
    c: float = 1.0
    alpha: float = 0.5
    psi_method: str = "normal_sd"
    roughness_method: str = "exact"
    pilot_location: str = "spacing"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"Bandwidth selection needs n >= 2, got {self.n}")
        if not self.c > 0:
            raise ValueError(f"Coupling constant c must be positive, got {self.c}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.psi_method not in PSI_METHODS:
            raise ValueError(f"Unknown psi method {self.psi_method!r}")
        if self.roughness_method not in ROUGHNESS_METHODS:
            raise ValueError(f"Unknown roughness method {self.roughness_method!r}")
        if self.pilot_location not in PILOT_LOCATIONS:
            raise ValueError(f"Unknown pilot location {self.pilot_location!r}")

    @property
    def amise_constant(self) -> float:
        """(R(K) (1 + 1/c) / sigma_K^4)^(1/5) without the Psi factor."""
        return (roughness(self.k, self.roughness_method) * (1.0 + 1.0 / self.c) / sigma_k_sq(self.k) ** 2) ** 0.2


@dataclass(frozen=True)
class FixedBandwidth:
    h: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"Fixed bandwidth must be positive and finite, got {self.h!r}")


@dataclass(frozen=True)
class AmiseBandwidth:
    c: float = 1.0
    psi_method: str = "normal_sd"
    roughness_method: str = "exact"


@dataclass(frozen=True)
class PercentileBandwidth:
    alpha: float = 0.5
    calibrated: bool = True
    c: float = 1.0
    psi_method: str = "normal_sd"
    roughness_method: str = "exact"
    pilot_location: str = "spacing"


BandwidthRule = Union[FixedBandwidth, AmiseBandwidth, PercentileBandwidth]


class PilotValue(NamedTuple):
    value: float
    floored: bool


@dataclass(frozen=True)
class BandwidthChoice:
    """Selected bandwidth plus what went into it."""

    h: float
    selector: str
    unclamped: float
    clamped: bool = False
    psi: Optional[float] = None
    pilot_floored: bool = False


def _sorted_data(data) -> np.ndarray:
    values = np.sort(np.asarray(data, dtype=float).ravel())
    if values.size < 2:
        raise ValueError(f"Need at least 2 observations, got {values.size}")
    return values


def spacings(data) -> np.ndarray:
    """First-order spacings d_i = x_(i+1) - x_(i) of the sorted data."""
    return np.diff(_sorted_data(data))


def spacing_quantile(gaps, alpha: float) -> float:
    """Empirical alpha-quantile, interpolating linearly at index (len - 1) alpha."""
    gaps = np.asarray(gaps, dtype=float)
    if gaps.size == 0:
        raise ValueError("Spacing quantile of an empty sample")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(np.quantile(gaps, alpha))


def _nondegenerate_quantile(data, alpha: float) -> float:
    d_alpha = spacing_quantile(spacings(data), alpha)
    if d_alpha <= 0:
        raise ValueError(f"degenerate sample (all ties): the {alpha:g}-quantile of the spacings is zero")
    return d_alpha


def h_raw_percentile(data, alpha: float = 0.5) -> float:
    """Raw percentile rule h = d_alpha / 2."""
    return _nondegenerate_quantile(data, alpha) / 2.0


def psi_normal_scale(s: float) -> float:
    """Psi(f'') = 3 s^-5 / (8 sqrt(pi)) for a normal density with standard deviation s."""
    if not s > 0:
        raise ValueError(f"Normal-reference scale must be positive, got {s}")
    return 3.0 * s ** -5 / (8.0 * math.sqrt(math.pi))


def psi_normal_reference(data, method: str = "normal_sd") -> float:
    """Normal-reference Psi(f'') with s = sd(x) or s = IQR(x) / 1.349."""
    values = _sorted_data(data)
    if method == "normal_sd":
        s = float(np.std(values, ddof=1))
    elif method == "normal_iqr":
        q75, q25 = np.percentile(values, [75, 25])
        s = float(q75 - q25) / 1.349
    else:
        raise ValueError(f"Unknown normal-reference method {method!r}")

    if s <= 0:
        raise ValueError(f"Normal-reference scale is zero ({method})")
    return psi_normal_scale(s)


def psi_from_density(grid: np.ndarray, density: np.ndarray) -> float:
    """Integral of (f'')^2 from density values on a uniform grid (numerical derivatives)."""
    step = grid[1] - grid[0]
    second = np.gradient(np.gradient(density, step), step)
    return float(trapezoid(second ** 2, grid))


def psi_kde_pilot(data) -> float:
    """Psi(f'') from a Silverman-bandwidth Gaussian KDE evaluated on a fine grid."""
    values = _sorted_data(data)
    h = silverman_bw(values)
    grid = np.linspace(values[0] - 4.0 * h, values[-1] + 4.0 * h, PSI_GRID_POINTS)
    return psi_from_density(grid, additive_kde(values, h).evaluate(grid))


def h_amise(inputs: SelectorInputs, psi_hat: float) -> float:
    """AMISE-optimal h = (R(K) (1 + 1/c) / (sigma_K^4 Psi))^(1/5) n^(-1/5)."""
    if not psi_hat > 0:
        raise ValueError(f"Psi estimate must be positive, got {psi_hat}")
    return inputs.amise_constant * psi_hat ** -0.2 * inputs.n ** -0.2


def pilot_density_at(data, x: float) -> PilotValue:
    """Silverman-bandwidth Gaussian KDE at x, floored at 1e-300."""
    values = _sorted_data(data)
    value = float(additive_kde(values, silverman_bw(values)).evaluate(x))
    if value > PILOT_FLOOR:
        return PilotValue(value, False)

    logger.warning(f"Pilot density at x={x:.6g} is below {PILOT_FLOOR:g}, using the floor")
    return PilotValue(PILOT_FLOOR, True)


def _spacing_pilot(values: np.ndarray, alpha: float) -> PilotValue:
    """Mean pilot density over midpoints of spacings ranked near alpha."""
    gaps = np.diff(values)
    order = np.argsort(gaps, kind="stable")
    ranks = np.empty(gaps.size)
    ranks[order] = (np.arange(gaps.size) + 0.5) / gaps.size

    chosen = np.abs(ranks - alpha) <= SPACING_RANK_WINDOW
    if not np.any(chosen):
        chosen = np.zeros(gaps.size, dtype=bool)
        chosen[np.argmin(np.abs(ranks - alpha))] = True

    midpoints = 0.5 * (values[:-1] + values[1:])[chosen]
    density = additive_kde(values, silverman_bw(values)).evaluate(midpoints)
    value = float(np.mean(density))
    if value > PILOT_FLOOR:
        return PilotValue(value, False)

    logger.warning(f"Spacing pilot density is below {PILOT_FLOOR:g}, using the floor")
    return PilotValue(PILOT_FLOOR, True)


def _pilot(values: np.ndarray, inputs: SelectorInputs) -> PilotValue:
    if inputs.pilot_location == "spacing":
        return _spacing_pilot(values, inputs.alpha)
    return pilot_density_at(values, float(np.median(values)))


def h_calibrated_percentile(data, inputs: SelectorInputs, psi_hat: float) -> float:
    """Calibrated percentile rule h = lambda_n d_alpha.

    lambda_n = n^(4/5) (R(K) (1 + 1/c) / (sigma_K^4 Psi))^(1/5) f(x_alpha) / q_alpha,
    q_alpha = -log(1 - alpha), f(x_alpha) a Silverman KDE pilot averaged over the
    midpoints of spacings ranked near alpha (or at the median, see pilot_location).
    """
    h, _ = _calibrated_with_pilot(data, inputs, psi_hat)
    return h


def _calibrated_with_pilot(data, inputs: SelectorInputs, psi_hat: float) -> tuple[float, PilotValue]:
    if not psi_hat > 0:
        raise ValueError(f"Psi estimate must be positive, got {psi_hat}")
    values = _sorted_data(data)
    d_alpha = _nondegenerate_quantile(values, inputs.alpha)
    q_alpha = -math.log1p(-inputs.alpha)
    pilot = _pilot(values, inputs)

    lam = inputs.n ** 0.8 * inputs.amise_constant * psi_hat ** -0.2 * pilot.value / q_alpha
    return lam * d_alpha, pilot


def estimate_psi(data, method: str, psi_pilot: Optional[Callable[[np.ndarray], float]] = None) -> float:
    """Dispatch the Psi(f'') pilot.

    Args:
        data: Observations (on the scale the noise is added on)
        method: One of normal_sd, normal_iqr, kde, shide
        psi_pilot: Callable used for method "shide" (supplied by the estimator)

    Returns:
        Positive Psi estimate
    """
    if method in ("normal_sd", "normal_iqr"):
        return psi_normal_reference(data, method)
    if method == "kde":
        return psi_kde_pilot(data)
    if method == "shide":
        if psi_pilot is None:
            raise ValueError("psi method 'shide' needs a SHIDE pilot callable")
        return psi_pilot(np.asarray(data, dtype=float))
    raise ValueError(f"Unknown psi method {method!r}")


def _clamp(h: float, data_range: float, selector: str) -> tuple[float, bool]:
    if h > data_range > 0:
        logger.warning(f"{selector} bandwidth {h:.6g} exceeds the data range {data_range:.6g}, clamping")
        return data_range, True
    return h, False


def select_bandwidth(
    data,
    rule: BandwidthRule,
    k: int,
    psi_pilot: Optional[Callable[[np.ndarray], float]] = None,
) -> BandwidthChoice:
    """Apply a bandwidth rule to data.

    Args:
        data: Observations on the working (noise) scale
        rule: FixedBandwidth, AmiseBandwidth or PercentileBandwidth
        k: Kernel order
        psi_pilot: SHIDE Psi pilot, needed only when psi_method == "shide"

    Returns:
        BandwidthChoice; data-driven rules are clamped to the data range
    """
    values = _sorted_data(data)
    data_range = float(values[-1] - values[0])

    if isinstance(rule, FixedBandwidth):
        return BandwidthChoice(h=rule.h, selector="fixed", unclamped=rule.h)

    if isinstance(rule, AmiseBandwidth):
        inputs = SelectorInputs(n=values.size, k=k, c=rule.c, psi_method=rule.psi_method,
                                roughness_method=rule.roughness_method)
        psi = estimate_psi(values, rule.psi_method, psi_pilot)
        raw = h_amise(inputs, psi)
        h, clamped = _clamp(raw, data_range, "AMISE")
        return BandwidthChoice(h=h, selector="opt", unclamped=raw, clamped=clamped, psi=psi)

    if isinstance(rule, PercentileBandwidth):
        if not rule.calibrated:
            raw = h_raw_percentile(values, rule.alpha)
            h, clamped = _clamp(raw, data_range, "Raw percentile")
            return BandwidthChoice(h=h, selector="perc-raw", unclamped=raw, clamped=clamped)

        inputs = SelectorInputs(n=values.size, k=k, c=rule.c, alpha=rule.alpha, psi_method=rule.psi_method,
                                roughness_method=rule.roughness_method, pilot_location=rule.pilot_location)
        psi = estimate_psi(values, rule.psi_method, psi_pilot)
        raw, pilot = _calibrated_with_pilot(values, inputs, psi)
        h, clamped = _clamp(raw, data_range, "Percentile")
        return BandwidthChoice(h=h, selector="perc", unclamped=raw, clamped=clamped, psi=psi,
                               pilot_floored=pilot.floored)

    raise ValueError(f"Unknown bandwidth rule {rule!r}")
