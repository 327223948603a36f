"""
SHIDE: simulation and histogram interpolation for density estimation.

Pipeline:
1. Map the data to the real line (log / logit for constrained supports)
2. Pick the noise half-width h and add m kernel draws to every observation
3. Histogram the pseudo-sample with the adjusted Sturges width
4. Interpolate the square-rooted bin heights with a natural cubic spline S
5. Report f(x) = S(x)^2
"""

import math
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import expit, logit

from .bandwidth import (
    AmiseBandwidth,
    BandwidthRule,
    FixedBandwidth,
    PercentileBandwidth,
    PSI_GRID_POINTS,
    psi_from_density,
    select_bandwidth,
)
from .config import BIN_RULES, MAX_KERNEL_ORDER, WORKING_SCALES
from .kernel import PolynomialKernel, sample_noise
from .spline import NaturalSpline, fit_natural_spline

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

STURGES_FACTOR = 3.322

# Four-point Gauss-Legendre is exact through degree 7; S^2 has degree 6
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class SupportSpec:
    """Domain of the variable: unbounded, lower, upper or interval."""

    kind: str = "unbounded"
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        needs = {
            "unbounded": (False, False),
            "lower": (True, False),
            "upper": (False, True),
            "interval": (True, True),
        }
        if self.kind not in needs:
            raise ValueError(f"Unknown support kind {self.kind!r}")

        want_lower, want_upper = needs[self.kind]
        if want_lower != (self.lower is not None) or want_upper != (self.upper is not None):
            raise ValueError(f"Support {self.kind!r} got lower={self.lower!r}, upper={self.upper!r}")
        for bound in (self.lower, self.upper):
            if bound is not None and not math.isfinite(bound):
                raise ValueError(f"Support bounds must be finite, got {bound!r}")
        if self.kind == "interval" and not self.lower < self.upper:
            raise ValueError(f"Interval support needs L < U, got L={self.lower}, U={self.upper}")

    @classmethod
    def unbounded(cls) -> "SupportSpec":
        return cls()

    @classmethod
    def lower_bounded(cls, lower: float) -> "SupportSpec":
        return cls("lower", lower=float(lower))

    @classmethod
    def upper_bounded(cls, upper: float) -> "SupportSpec":
        return cls("upper", upper=float(upper))

    @classmethod
    def interval(cls, lower: float, upper: float) -> "SupportSpec":
        return cls("interval", lower=float(lower), upper=float(upper))

    @classmethod
    def from_bounds(cls, lower: Optional[float] = None, upper: Optional[float] = None) -> "SupportSpec":
        """Build the support implied by optional bounds (as given on the command line)."""
        if lower is not None and upper is not None:
            return cls.interval(lower, upper)
        if lower is not None:
            return cls.lower_bounded(lower)
        if upper is not None:
            return cls.upper_bounded(upper)
        return cls.unbounded()

    @property
    def is_unbounded(self) -> bool:
        return self.kind == "unbounded"

    def contains(self, x: ArrayLike) -> np.ndarray:
        """True where x lies strictly inside the support."""
        x = np.asarray(x, dtype=float)
        inside = np.isfinite(x)
        if self.lower is not None:
            inside &= x > self.lower
        if self.upper is not None:
            inside &= x < self.upper
        return inside

    def describe(self) -> str:
        if self.kind == "unbounded":
            return "(-inf, inf)"
        lower = "-inf" if self.lower is None else f"{self.lower:g}"
        upper = "inf" if self.upper is None else f"{self.upper:g}"
        return f"({lower}, {upper})"


def forward_transform(support: SupportSpec, x: ArrayLike) -> ArrayLike:
    """Map values inside the support to the real line.

    Unbounded: x; lower: log(x - L); upper: log(U - x);
    interval: logit((x - L) / (U - L)).

    Raises:
        ValueError: If any value is on or outside the boundary
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    inside = support.contains(x)
    if not np.all(inside):
        offending = float(np.ravel(x)[np.argmin(np.ravel(inside))])
        raise ValueError(f"Value {offending!r} is not strictly inside the support {support.describe()}")

    if support.kind == "lower":
        z = np.log(x - support.lower)
    elif support.kind == "upper":
        z = np.log(support.upper - x)
    elif support.kind == "interval":
        z = logit((x - support.lower) / (support.upper - support.lower))
    else:
        z = x.copy()
    return float(z) if scalar else z


def backward_transform(support: SupportSpec, z: ArrayLike) -> ArrayLike:
    """Inverse of forward_transform; results are kept strictly inside the support."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)

    if support.kind == "lower":
        x = np.exp(z) + support.lower
    elif support.kind == "upper":
        x = support.upper - np.exp(z)
    elif support.kind == "interval":
        x = support.lower + (support.upper - support.lower) * expit(z)
    else:
        x = z.copy()

    if support.lower is not None:
        x = np.maximum(x, np.nextafter(support.lower, np.inf))
    if support.upper is not None:
        x = np.minimum(x, np.nextafter(support.upper, -np.inf))
    return float(x) if scalar else x


def transform_jacobian(support: SupportSpec, x: ArrayLike) -> ArrayLike:
    """|dw/dx| of the forward transform at points inside the support."""
    x = np.asarray(x, dtype=float)
    if support.kind == "lower":
        return 1.0 / (x - support.lower)
    if support.kind == "upper":
        return 1.0 / (support.upper - x)
    if support.kind == "interval":
        return (support.upper - support.lower) / ((x - support.lower) * (support.upper - x))
    return np.ones_like(x)


def _simulate(z: np.ndarray, kernel: PolynomialKernel, m: int, rng: np.random.Generator) -> np.ndarray:
    """m noisy replicates per observation, observation-major order."""
    if m < 1:
        raise ValueError(f"Pseudo-replicates per observation must be >= 1, got {m}")
    noise = sample_noise(kernel, rng, z.size * m).reshape(z.size, m)
    return (z[:, None] + noise).ravel()


def generate_pseudo(data, kernel: PolynomialKernel, m: int, support: SupportSpec,
                    rng: np.random.Generator) -> np.ndarray:
    """Pseudo-data X'_ij = backward(forward(X_i) + eps_ij), j = 1..m.

    Args:
        data: Observations strictly inside the support
        kernel: Noise kernel K_h
        m: Replicates per observation
        support: Variable domain
        rng: Caller-owned generator

    Returns:
        Array of length n * m, strictly inside the support
    """
    values = np.asarray(data, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("Cannot generate pseudo-data from an empty sample")
    z = forward_transform(support, values)
    return backward_transform(support, _simulate(np.atleast_1d(z), kernel, m, rng))


def _sturges_width(data_range: float, h: float, n: int, m: int) -> float:
    return (data_range + 2.0 * h) / (1.0 + STURGES_FACTOR * (math.log10(n) + math.log10(m)))


def bin_width(data_range: float, h: float, n: int, m: int) -> float:
    """Adjusted Sturges width (R + 2h) / (1 + 3.322 (log10 n + log10 m)).

    Raises:
        ValueError: On nonpositive range or h, n < 2 or m < 1
    """
    if not data_range > 0:
        raise ValueError(f"Data range must be positive, got {data_range}")
    if not h > 0:
        raise ValueError(f"Bandwidth must be positive, got {h}")
    if n < 2:
        raise ValueError(f"Sample size must be at least 2, got {n}")
    if m < 1:
        raise ValueError(f"Pseudo-replicates must be at least 1, got {m}")
    return _sturges_width(data_range, h, n, m)


def fd_bin_width(pseudo: np.ndarray) -> float:
    """Freedman-Diaconis width 2 IQR N^(-1/3) of the pseudo-sample (0 when the IQR vanishes)."""
    q75, q25 = np.percentile(pseudo, [75, 25])
    return 2.0 * float(q75 - q25) * pseudo.size ** (-1.0 / 3.0)


@dataclass(frozen=True)
class HistogramGrid:
    """Density histogram of the pseudo-sample, anchored at its minimum."""

    theta: float
    midpoints: np.ndarray
    heights: np.ndarray
    counts: np.ndarray
    total: int

    @property
    def bins(self) -> int:
        return int(self.midpoints.size)

    @property
    def edges(self) -> np.ndarray:
        start = self.midpoints[0] - self.theta / 2.0
        return start + self.theta * np.arange(self.bins + 1)


def build_histogram(pseudo, theta: float, min_bins: int = 1) -> HistogramGrid:
    """Bin values into B = ceil(range / theta) half-open bins of width theta.

    The last bin is closed and may extend past the maximum.

    Args:
        pseudo: Values to bin
        theta: Bin width
        min_bins: Lower bound on B (the spline needs 2)

    Returns:
        HistogramGrid with p_r = N_r / (total * theta)
    """
    values = np.asarray(pseudo, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("Cannot build a histogram from an empty sample")
    if not (np.isfinite(theta) and theta > 0):
        raise ValueError(f"Bin width must be positive and finite, got {theta!r}")

    lo = float(values.min())
    span = float(values.max()) - lo
    bins = max(int(math.ceil(span / theta)), min_bins, 1)

    index = np.clip(np.floor((values - lo) / theta).astype(np.int64), 0, bins - 1)
    counts = np.bincount(index, minlength=bins)
    total = int(values.size)

    midpoints = lo + theta * (np.arange(bins) + 0.5)
    heights = counts / (total * theta)
    return HistogramGrid(theta=float(theta), midpoints=midpoints, heights=heights, counts=counts, total=total)


@dataclass(frozen=True)
class ShideConfig:
    """Estimator settings."""

    k: int = 3
    m: int = 10
    bandwidth: BandwidthRule = field(default_factory=AmiseBandwidth)
    support: SupportSpec = field(default_factory=SupportSpec)
    seed: int = 0
    normalize: bool = False
    grid_points: int = 512
    working_scale: str = "original"
    bin_rule: str = "sturges"

    def __post_init__(self):
        if int(self.k) != self.k or not 1 <= self.k <= MAX_KERNEL_ORDER:
            raise ValueError(f"k must be an integer in [1, {MAX_KERNEL_ORDER}], got {self.k!r}")
        if self.m < 1:
            raise ValueError(f"m must be at least 1, got {self.m}")
        if self.grid_points < 2:
            raise ValueError(f"grid_points must be at least 2, got {self.grid_points}")
        if self.working_scale not in WORKING_SCALES:
            raise ValueError(f"Unknown working scale {self.working_scale!r}")
        if self.bin_rule not in BIN_RULES:
            raise ValueError(f"Unknown bin rule {self.bin_rule!r}")
        if isinstance(self.bandwidth, PercentileBandwidth) and not 0 < self.bandwidth.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.bandwidth.alpha}")
        if isinstance(self.bandwidth, (AmiseBandwidth, PercentileBandwidth)) and not self.bandwidth.c > 0:
            raise ValueError(f"c must be positive, got {self.bandwidth.c}")


@dataclass(frozen=True)
class DensityEstimate:
    """Fitted SHIDE density. The spline lives on the working scale."""

    spline: NaturalSpline
    support: SupportSpec
    data_range: tuple[float, float]
    h_used: float
    theta_used: float
    normalization_constant: float = 1.0
    working_scale: str = "original"
    selector: str = "fixed"
    bins: int = 0
    h_clamped: bool = False

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        return evaluate_density(self, x)

    def grid(self, points: int, pad: float = 0.0) -> np.ndarray:
        """Uniform grid over the pseudo-data window, widened by pad times its width."""
        lo, hi = self.data_range
        margin = pad * (hi - lo)
        return np.linspace(lo - margin, hi + margin, points)

    def integrate(self, points: Optional[int] = None) -> float:
        """Integral of the estimate over the pseudo-data window.

        Exact by default: S^2 is piecewise polynomial, so Gauss-Legendre on each
        knot interval integrates it without error. With points, a trapezoid on
        that many grid points instead.
        """
        if points is not None:
            grid = self.grid(points)
            return float(trapezoid(evaluate_density(self, grid), grid))

        lo, hi = self.data_range
        if self.working_scale == "transformed":
            # Substituting w = w(x) removes the Jacobian
            lo, hi = sorted(np.ravel(forward_transform(self.support, np.array([lo, hi]))))
        return self.normalization_constant * _squared_spline_integral(self.spline, float(lo), float(hi))


def _squared_spline_integral(spline: NaturalSpline, lo: float, hi: float) -> float:
    if not hi > lo:
        return 0.0
    knots = spline.knots
    breaks = np.concatenate(([lo], knots[(knots > lo) & (knots < hi)], [hi]))
    half = np.diff(breaks) / 2.0
    middle = (breaks[:-1] + breaks[1:]) / 2.0
    x = middle[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    return float(np.sum(half[:, None] * _GAUSS_WEIGHTS[None, :] * spline(x) ** 2))


def evaluate_density(estimate: DensityEstimate, x: ArrayLike) -> ArrayLike:
    """Density on the original scale; 0 outside the support or the pseudo-data window."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    lo, hi = estimate.data_range

    mask = estimate.support.contains(x) & (x >= lo) & (x <= hi)
    out = np.zeros(x.shape)
    inside = x[mask]

    if estimate.working_scale == "transformed":
        w = forward_transform(estimate.support, inside)
        values = estimate.spline(w) ** 2 * transform_jacobian(estimate.support, inside)
    else:
        values = estimate.spline(inside) ** 2

    out[mask] = estimate.normalization_constant * values
    return float(out) if scalar else out


def _validated_data(data, support: SupportSpec) -> np.ndarray:
    values = np.asarray(data, dtype=float).ravel()
    if values.size < 2:
        raise ValueError(f"SHIDE needs at least 2 observations, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError("Data must be finite")
    return values


def psi_shide_pilot(data, config: ShideConfig) -> float:
    """Psi(f'') from a SHIDE pilot fitted with the normal-reference AMISE bandwidth.

    Args:
        data: Observations on the real-line working scale
        config: Estimator settings (k, m, c, roughness, seed and bin rule are reused)

    Returns:
        Trapezoid integral of the squared numerical second derivative of the pilot
    """
    rule = config.bandwidth
    pilot_rule = AmiseBandwidth(
        c=getattr(rule, "c", 1.0),
        psi_method="normal_sd",
        roughness_method=getattr(rule, "roughness_method", "exact"),
    )
    pilot_config = replace(config, bandwidth=pilot_rule, support=SupportSpec(), normalize=False,
                           working_scale="original")
    pilot = shide_estimate(data, pilot_config)
    grid = pilot.grid(PSI_GRID_POINTS)
    return psi_from_density(grid, pilot.evaluate(grid))


def shide_estimate(data, config: Optional[ShideConfig] = None) -> DensityEstimate:
    """Fit a SHIDE density.

    Args:
        data: At least 2 finite observations strictly inside config.support
        config: Estimator settings (defaults: k=3, m=10, AMISE bandwidth, unbounded)

    Returns:
        DensityEstimate

    Raises:
        ValueError: On too few observations, values outside the support, or
            invalid settings
    """
    config = config or ShideConfig()
    support = config.support
    values = _validated_data(data, support)
    n, m = values.size, config.m
    z = forward_transform(support, values)

    choice = select_bandwidth(z, config.bandwidth, config.k,
                              psi_pilot=lambda pilot_data: psi_shide_pilot(pilot_data, config))
    kernel = PolynomialKernel(config.k, choice.h)

    rng = np.random.default_rng(config.seed)
    z_pseudo = _simulate(z, kernel, m, rng)
    pseudo = backward_transform(support, z_pseudo)

    on_real_line = support.is_unbounded or config.working_scale == "transformed"
    if on_real_line:
        work = z_pseudo
        data_range = float(np.ptp(z))
        expansion = choice.h
    else:
        work = pseudo
        data_range = float(np.ptp(values))
        expansion = max((float(np.ptp(work)) - data_range) / 2.0, 0.0)

    theta = _sturges_width(data_range, expansion, n, m)
    if config.bin_rule == "fd":
        fd_theta = fd_bin_width(work)
        if fd_theta > 0:
            theta = fd_theta
        else:
            logger.warning("Pseudo-sample IQR is zero, keeping the Sturges bin width")
    if not theta > 0:
        raise ValueError("Degenerate sample: zero range and zero noise leave no bin width")

    hist = build_histogram(work, theta, min_bins=2)
    spline = fit_natural_spline(hist.midpoints, np.sqrt(hist.heights))

    estimate = DensityEstimate(
        spline=spline,
        support=support,
        data_range=(float(pseudo.min()), float(pseudo.max())),
        h_used=choice.h,
        theta_used=hist.theta,
        working_scale=config.working_scale,
        selector=choice.selector,
        bins=hist.bins,
        h_clamped=choice.clamped,
    )

    if config.normalize:
        mass = estimate.integrate()
        if not mass > 0:
            raise ValueError(f"Cannot normalize an estimate with integral {mass}")
        estimate = replace(estimate, normalization_constant=1.0 / mass)

    logger.debug(
        f"SHIDE fit: n={n} m={m} k={config.k} h={choice.h:.6g} ({choice.selector}) "
        f"theta={hist.theta:.6g} B={hist.bins}"
    )
    return estimate
