"""
Natural cubic spline interpolation on a uniform knot grid.

The second derivatives M_i solve the tridiagonal system
M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / theta^2 with
M_1 = M_B = 0. Beyond the end knots the spline continues along its tangent line.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class NaturalSpline:
    """Fitted natural cubic spline. Arrays are read-only."""

    knots: np.ndarray
    values: np.ndarray
    second_derivatives: np.ndarray

    @property
    def theta(self) -> float:
        """Uniform knot spacing."""
        return float(self.knots[1] - self.knots[0])

    @property
    def left_slope(self) -> float:
        """First derivative at the first knot."""
        y, M, theta = self.values, self.second_derivatives, self.theta
        return (y[1] - y[0]) / theta - (2.0 * M[0] + M[1]) * theta / 6.0

    @property
    def right_slope(self) -> float:
        """First derivative at the last knot."""
        y, M, theta = self.values, self.second_derivatives, self.theta
        return (y[-1] - y[-2]) / theta + (M[-2] + 2.0 * M[-1]) * theta / 6.0

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return eval_spline(self, x)

    def derivative(self, x: ArrayLike, order: int = 1) -> ArrayLike:
        return eval_spline_derivative(self, x, order)


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm (forward elimination, back substitution, no pivoting).

    Args:
        lower: Sub-diagonal, lower[0] is ignored
        diag: Main diagonal
        upper: Super-diagonal, upper[-1] is ignored
        rhs: Right-hand side

    Returns:
        Solution vector
    """
    n = len(diag)
    b = np.array(diag, dtype=float)
    d = np.array(rhs, dtype=float)

    for i in range(1, n):
        w = lower[i] / b[i - 1]
        b[i] -= w * upper[i - 1]
        d[i] -= w * d[i - 1]

    x = np.empty(n)
    x[-1] = d[-1] / b[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (d[i] - upper[i] * x[i + 1]) / b[i]
    return x


def natural_spline_system(values: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Interior equations of the natural spline as tridiagonal bands.

    Returns:
        (lower, diag, upper, rhs) for M_2..M_{B-1}
    """
    y = np.asarray(values, dtype=float)
    interior = len(y) - 2
    lower = np.ones(interior)
    upper = np.ones(interior)
    diag = np.full(interior, 4.0)
    rhs = 6.0 * (y[2:] - 2.0 * y[1:-1] + y[:-2]) / theta ** 2
    return lower, diag, upper, rhs


def fit_natural_spline(knots, values) -> NaturalSpline:
    """Fit the natural cubic spline through (knots, values).

    Args:
        knots: Strictly increasing, uniformly spaced knots (at least 2)
        values: Finite values at the knots

    Returns:
        NaturalSpline with M_1 = M_B = 0

    Raises:
        ValueError: If the grid is too short, not uniform, or values are not finite
    """
    b = np.array(knots, dtype=float)
    y = np.array(values, dtype=float)

    if b.ndim != 1 or b.size < 2:
        raise ValueError(f"Natural spline needs at least 2 knots, got {b.size}")
    if y.shape != b.shape:
        raise ValueError(f"Got {y.size} values for {b.size} knots")
    if not np.all(np.isfinite(b)) or not np.all(np.isfinite(y)):
        raise ValueError("Knots and values must be finite")

    steps = np.diff(b)
    theta = steps[0]
    # Rounding floor for knots far from the origin
    atol = 8.0 * np.finfo(float).eps * float(np.max(np.abs(b)))
    if theta <= 0 or not np.allclose(steps, theta, rtol=SPACING_RTOL, atol=atol):
        raise ValueError(
            f"Knots must be strictly increasing with uniform spacing "
            f"(spacings range {steps.min():.6g}..{steps.max():.6g})"
        )

    M = np.zeros_like(y)
    if b.size > 2:
        M[1:-1] = solve_tridiagonal(*natural_spline_system(y, theta))

    for array in (b, y, M):
        array.setflags(write=False)

    return NaturalSpline(knots=b, values=y, second_derivatives=M)


def _segments(spline: NaturalSpline, x: np.ndarray):
    # Knots map to the segment they start, so S(b_i) = y_i to rounding
    b = spline.knots
    i = np.clip(np.searchsorted(b, x, side="right") - 1, 0, b.size - 2)
    left = x - b[i]
    right = b[i + 1] - x
    return i, left, right, b[i + 1] - b[i]


def eval_spline(spline: NaturalSpline, x: ArrayLike) -> ArrayLike:
    """Evaluate the spline, extending it linearly beyond the end knots.

    On [b_i, b_{i+1}]:
        S(x) = M_i (b_{i+1}-x)^3 / (6 theta) + M_{i+1} (x-b_i)^3 / (6 theta)
               + (y_i - M_i theta^2 / 6) (b_{i+1}-x) / theta
               + (y_{i+1} - M_{i+1} theta^2 / 6) (x-b_i) / theta
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    y, M = spline.values, spline.second_derivatives
    i, left, right, theta = _segments(spline, x)

    inner = (
        M[i] * right ** 3 / (6.0 * theta)
        + M[i + 1] * left ** 3 / (6.0 * theta)
        + (y[i] - M[i] * theta ** 2 / 6.0) * right / theta
        + (y[i + 1] - M[i + 1] * theta ** 2 / 6.0) * left / theta
    )

    b = spline.knots
    result = np.where(x < b[0], y[0] + spline.left_slope * (x - b[0]), inner)
    result = np.where(x > b[-1], y[-1] + spline.right_slope * (x - b[-1]), result)
    return float(result) if scalar else result


def eval_spline_derivative(spline: NaturalSpline, x: ArrayLike, order: int = 1) -> ArrayLike:
    """First or second derivative of the spline (including its linear extension)."""
    if order not in (1, 2):
        raise ValueError(f"Derivative order must be 1 or 2, got {order}")

    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    y, M = spline.values, spline.second_derivatives
    i, left, right, theta = _segments(spline, x)
    b = spline.knots

    if order == 1:
        inner = (
            -M[i] * right ** 2 / (2.0 * theta)
            + M[i + 1] * left ** 2 / (2.0 * theta)
            + (y[i + 1] - y[i]) / theta
            - (M[i + 1] - M[i]) * theta / 6.0
        )
        result = np.where(x < b[0], spline.left_slope, inner)
        result = np.where(x > b[-1], spline.right_slope, result)
    else:
        inner = (M[i] * right + M[i + 1] * left) / theta
        result = np.where((x < b[0]) | (x > b[-1]), 0.0, inner)

    return float(result) if scalar else result
