"""
Uniform-sum polynomial kernels.

The kernel of order k is the density of V_k = U_1 + ... + U_k with U_i uniform
on [-1/2, 1/2] (a centered Irwin-Hall law). Rescaling it to the support
[-h, h] gives K_h, the bounded noise law used to simulate pseudo-data.
"""

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .config import MAX_KERNEL_ORDER

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _check_order(k: int) -> None:
    if int(k) != k or k < 1:
        raise ValueError(f"Kernel order must be a positive integer, got {k!r}")
    if k > MAX_KERNEL_ORDER:
        raise ValueError(
            f"Kernel order {k} exceeds {MAX_KERNEL_ORDER}: the alternating Irwin-Hall sum "
            f"is not accurate beyond that"
        )


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


@dataclass(frozen=True)
class PolynomialKernel:
    """Order-k uniform-sum kernel scaled to the support [-h, h]."""

    k: int
    h: float

    def __post_init__(self):
        _check_order(self.k)
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"Kernel half-width must be positive and finite, got {self.h!r}")

    @property
    def variance(self) -> float:
        """Variance of the noise law, h^2 / (3k)."""
        return self.h ** 2 * sigma_k_sq(self.k)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        return kernel_pdf(self, x)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return sample_noise(self, rng, count)


def fk_pdf(k: int, v: ArrayLike) -> ArrayLike:
    """Density of the sum of k independent uniforms on [-1/2, 1/2].

    Evaluated with the shifted Irwin-Hall closed form on |v|, which keeps the
    alternating sum short (at most k/2 + 1 terms) and the result symmetric.

    Args:
        k: Kernel order (1 <= k <= 30)
        v: Point or array of points

    Returns:
        Density value(s), zero outside [-k/2, k/2]
    """
    _check_order(k)
    scalar = np.ndim(v) == 0
    v = np.abs(np.asarray(v, dtype=float))

    # Distance from the left edge of the support, mirrored onto [0, k/2]
    u = k / 2.0 - v
    inside = u >= 0
    u = np.where(inside, u, 0.0)

    total = np.zeros_like(u)
    for j in range(k // 2 + 1):
        shifted = u - j
        active = shifted >= 0
        power = np.ones_like(u) if k == 1 else np.where(active, shifted, 0.0) ** (k - 1)
        total += (-1) ** j * math.comb(k, j) * np.where(active, power, 0.0)

    density = np.where(inside, np.maximum(total / math.factorial(k - 1), 0.0), 0.0)
    return _as_output(density, scalar)


def kernel_pdf(kernel: PolynomialKernel, x: ArrayLike) -> ArrayLike:
    """Scaled kernel K_h(x) = (k / 2h) f_k(k x / 2h), supported on [-h, h]."""
    scale = kernel.k / (2.0 * kernel.h)
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    density = np.where(np.abs(x) <= kernel.h, scale * fk_pdf(kernel.k, scale * x), 0.0)
    return _as_output(density, scalar)


def kernel_cf(k: int, t: ArrayLike) -> ArrayLike:
    """Characteristic function [sin(t/2) / (t/2)]^k of f_k."""
    _check_order(k)
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    near_zero = np.abs(t) < 1e-8
    half = np.where(near_zero, 1.0, t / 2.0)
    sinc = np.where(near_zero, 1.0, np.sin(half) / half)
    return _as_output(sinc ** k, scalar)


def sample_noise(kernel: PolynomialKernel, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw noise from K_h as (2h/k) times a sum of k centered uniforms.

    Args:
        kernel: Noise kernel
        rng: Caller-owned generator, advanced by count * k uniforms
        count: Number of draws

    Returns:
        Array of shape (count,), every draw in [-h, h]
    """
    if count < 0:
        raise ValueError(f"Sample count must be nonnegative, got {count}")
    if count == 0:
        return np.empty(0)

    uniforms = rng.uniform(-0.5, 0.5, size=(count, kernel.k))
    draws = uniforms.sum(axis=1) * (2.0 * kernel.h / kernel.k)
    return np.clip(draws, -kernel.h, kernel.h)


def sigma_k_sq(k: int) -> float:
    """Variance 1/(3k) of the base kernel on [-1, 1]."""
    _check_order(k)
    return 1.0 / (3.0 * k)


def _centered_irwin_hall_at_zero(order: int) -> Fraction:
    """f_order(0) in exact rational arithmetic."""
    half = Fraction(order, 2)
    total = Fraction(0)
    j = 0
    while half - j >= 0:
        total += (-1) ** j * math.comb(order, j) * (half - j) ** (order - 1)
        j += 1
    return total / math.factorial(order - 1)


def roughness(k: int, method: str = "exact") -> float:
    """Roughness R(K) of the base kernel on [-1, 1].

    Args:
        k: Kernel order
        method: "exact" for the integral of K^2, i.e. (k/2) f_{2k}(0);
            "paper" for the closed form k / (2 * 4^k) * C(2k, k)

    Returns:
        Positive roughness value
    """
    _check_order(k)
    if method == "paper":
        return k * math.comb(2 * k, k) / (2.0 * 4 ** k)
    if method == "exact":
        return float(Fraction(k, 2) * _centered_irwin_hall_at_zero(2 * k))
    raise ValueError(f"Unknown roughness method {method!r} (expected 'paper' or 'exact')")
