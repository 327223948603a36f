"""
Configuration module for the shide project.

Provides centralized configuration with sensible defaults that can be
overridden via environment variables or a YAML file passed to the CLI.
"""

import os
import logging
from dataclasses import dataclass
from typing import Any, Dict

import yaml

logger = logging.getLogger(__name__)

ROUGHNESS_METHODS = ("paper", "exact")
WORKING_SCALES = ("original", "transformed")
PSI_METHODS = ("normal_sd", "normal_iqr", "kde", "shide")
BIN_RULES = ("sturges", "fd")
PILOT_LOCATIONS = ("spacing", "median")
KDE_REFERENCES = ("binned", "exact")

# Largest kernel order the closed-form Irwin-Hall sum is trusted for
MAX_KERNEL_ORDER = 30


@dataclass
class EstimatorDefaults:
    """Defaults for the SHIDE estimator and its bandwidth selectors."""

    k: int = int(os.getenv("SHIDE_K", "3"))
    m: int = int(os.getenv("SHIDE_M", "10"))
    c: float = float(os.getenv("SHIDE_C", "1.0"))
    alpha: float = float(os.getenv("SHIDE_ALPHA", "0.5"))
    grid_points: int = int(os.getenv("SHIDE_GRID_POINTS", "512"))

    roughness_method: str = os.getenv("SHIDE_ROUGHNESS", "exact")
    working_scale: str = os.getenv("SHIDE_WORKING_SCALE", "original")
    psi_method: str = os.getenv("SHIDE_PSI", "normal_sd")
    bin_rule: str = os.getenv("SHIDE_BIN_RULE", "sturges")
    pilot_location: str = os.getenv("SHIDE_PILOT_LOCATION", "spacing")


@dataclass
class BenchDefaults:
    """Monte-Carlo benchmark configuration."""

    reps: int = int(os.getenv("SHIDE_BENCH_REPS", "300"))
    jobs: int = int(os.getenv("SHIDE_JOBS", str(os.cpu_count() or 1)))
    seed: int = int(os.getenv("SHIDE_SEED", "0"))

    # Model V is read as N(0, sigma) truncated to (-1, 0.5) with sigma a standard deviation
    model5_sigma: float = float(os.getenv("SHIDE_MODEL5_SIGMA", "3.0"))

    # MISE window is [min(data) - pad*h, max(data) + pad*h]
    window_pad: float = 3.0

    # KDE_SJ is scored with R-style binned bw.SJ and density() unless "exact"
    kde_reference: str = os.getenv("SHIDE_KDE_REFERENCE", "binned")


@dataclass
class LoggingConfig:
    """Logging settings."""

    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_format: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass
class ProjectDefaults:
    """Complete project configuration with all defaults."""

    estimator: EstimatorDefaults
    bench: BenchDefaults
    logging: LoggingConfig

    def __init__(self):
        """Initialize all configuration sections."""
        self.estimator = EstimatorDefaults()
        self.bench = BenchDefaults()
        self.logging = LoggingConfig()

    @classmethod
    def from_env(cls) -> "ProjectDefaults":
        """Create configuration from environment variables.

        This is the recommended way to instantiate configuration
        as it ensures all environment variables are read.
        """
        return cls()

    def validate(self) -> list[str]:
        """Validate configuration and return list of errors.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        est = self.estimator

        if not 1 <= est.k <= MAX_KERNEL_ORDER:
            errors.append(f"SHIDE_K must be in [1, {MAX_KERNEL_ORDER}], got {est.k}")

        if est.m < 1:
            errors.append(f"SHIDE_M must be at least 1, got {est.m}")

        if est.c <= 0:
            errors.append(f"SHIDE_C must be positive, got {est.c}")

        if not 0 < est.alpha < 1:
            errors.append(f"SHIDE_ALPHA must be in (0, 1), got {est.alpha}")

        if est.grid_points < 2:
            errors.append(f"SHIDE_GRID_POINTS must be at least 2, got {est.grid_points}")

        for name, value, allowed in (
            ("SHIDE_ROUGHNESS", est.roughness_method, ROUGHNESS_METHODS),
            ("SHIDE_WORKING_SCALE", est.working_scale, WORKING_SCALES),
            ("SHIDE_PSI", est.psi_method, PSI_METHODS),
            ("SHIDE_BIN_RULE", est.bin_rule, BIN_RULES),
            ("SHIDE_PILOT_LOCATION", est.pilot_location, PILOT_LOCATIONS),
        ):
            if value not in allowed:
                errors.append(f"{name} must be one of {', '.join(allowed)}, got {value!r}")

        if self.bench.reps < 1:
            errors.append(f"SHIDE_BENCH_REPS must be at least 1, got {self.bench.reps}")

        if self.bench.jobs < 1:
            errors.append(f"SHIDE_JOBS must be at least 1, got {self.bench.jobs}")

        if self.bench.model5_sigma <= 0:
            errors.append(f"SHIDE_MODEL5_SIGMA must be positive, got {self.bench.model5_sigma}")

        if self.bench.kde_reference not in KDE_REFERENCES:
            errors.append(f"SHIDE_KDE_REFERENCE must be one of {', '.join(KDE_REFERENCES)}, got {self.bench.kde_reference!r}")

        if self.logging.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL is not a logging level: {self.logging.log_level!r}")

        return errors


def load_overrides(path: str, allowed: set[str]) -> Dict[str, Any]:
    """Read CLI defaults from a YAML mapping.

    Keys are CLI option names; dashes and underscores are interchangeable
    (``working-scale`` and ``working_scale`` both set ``--working-scale``).

    Args:
        path: Path to the YAML file
        allowed: Destination names the calling command accepts

    Returns:
        Mapping of argparse destination names to values

    Raises:
        ValueError: If the file is not a mapping or names an unknown option
    """
    with open(path, 'r', encoding='utf-8') as f:
        loaded = yaml.safe_load(f) or {}

    if not isinstance(loaded, dict):
        raise ValueError(f"Config file {path} must contain a mapping, got {type(loaded).__name__}")

    overrides = {}
    for key, value in loaded.items():
        dest = str(key).replace("-", "_")
        if dest not in allowed:
            raise ValueError(f"Unknown option in config file {path}: {key!r}")
        overrides[dest] = value

    logger.debug(f"Loaded {len(overrides)} overrides from {path}")
    return overrides


# Global configuration instance
# Use this throughout the application
config = ProjectDefaults.from_env()
