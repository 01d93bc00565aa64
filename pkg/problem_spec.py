"""
Problem Specification
Problem instance for the damped semilinear wave equation and its flat KEY=VALUE config files
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

import numpy as np
from dotenv import dotenv_values

from error_recovery import ConfigError, InvalidArgument
from exponents import strauss_exponent

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CONFIG_DEFAULTS: Dict[str, str] = {
    "R": "1",
    "F_AMPLITUDE": "1",
    "F_SMOOTHNESS": "3",
    "G_AMPLITUDE": "1",
    "G_SMOOTHNESS": "3",
    "DR": repr(2.0 ** -8),
    "CFL": "0.9",
    "T_MAX": "400",
    "BLOWUP_THRESHOLD": "1e6",
    "OUTPUT_STRIDE": "4",
}
REQUIRED_KEYS = ("N", "MU", "P")


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump amplitude * (1 - r^2/R^2)_+^k"""
    amplitude: float = 1.0
    smoothness: int = 3

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidArgument(f"bump amplitude must be >= 0, got {self.amplitude}")
        if self.smoothness < 3:
            raise InvalidArgument(f"bump smoothness must be >= 3, got {self.smoothness}")

    def __call__(self, r, radius: float):
        r = np.asarray(r, dtype=float)
        base = np.clip(1.0 - (r / radius) ** 2, 0.0, None)
        return self.amplitude * base ** self.smoothness

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0


@dataclass(frozen=True)
class GridParams:
    dr: float = 2.0 ** -8
    cfl: float = 0.9
    t_max: float = 400.0

    def __post_init__(self):
        if self.dr <= 0:
            raise InvalidArgument(f"dr must be > 0, got {self.dr}")
        if not (0 < self.cfl < 1):
            raise InvalidArgument(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.t_max <= 0:
            raise InvalidArgument(f"t_max must be > 0, got {self.t_max}")

    @property
    def dt(self) -> float:
        return self.cfl * self.dr


@dataclass(frozen=True)
class ProblemSpec:
    """
    Full problem instance: dimension, damping, power, support radius, data and grid

    Zero data is accepted here (the solver handles it); the certificate
    rejects it through is_admissible().
    """
    n: int
    mu: float
    p: float
    R: float = 1.0
    f_profile: BumpProfile = field(default_factory=BumpProfile)
    g_profile: BumpProfile = field(default_factory=BumpProfile)
    grid: GridParams = field(default_factory=GridParams)
    blowup_threshold: float = 1e6
    output_stride: int = 4

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidArgument(f"n must be an integer >= 2, got {self.n}")
        if self.mu <= 0:
            raise InvalidArgument(f"mu must be > 0, got {self.mu}")
        p_s = strauss_exponent(self.n + self.mu)
        if not (1 < self.p < p_s):
            raise InvalidArgument(f"p must satisfy 1 < p < p_S(n+mu) = {p_s:.10g}, got {self.p}")
        if self.R < 1:
            raise InvalidArgument(f"R must be >= 1, got {self.R}")
        if self.blowup_threshold < 1e3:
            raise InvalidArgument(f"blowup_threshold must be >= 1e3, got {self.blowup_threshold}")
        if self.output_stride < 1:
            raise InvalidArgument(f"output_stride must be >= 1, got {self.output_stride}")

    def is_admissible(self) -> bool:
        """Nonnegative data that do not vanish identically"""
        return not (self.f_profile.is_zero and self.g_profile.is_zero)

    def f(self, r):
        return self.f_profile(r, self.R)

    def g(self, r):
        return self.g_profile(r, self.R)

    def with_grid(self, **changes) -> "ProblemSpec":
        return replace(self, grid=replace(self.grid, **changes))

    def scaled_data(self, factor: float) -> "ProblemSpec":
        """Both amplitudes multiplied by factor"""
        return replace(
            self,
            f_profile=replace(self.f_profile, amplitude=self.f_profile.amplitude * factor),
            g_profile=replace(self.g_profile, amplitude=self.g_profile.amplitude * factor),
        )

    # ==================== CONFIG ====================

    def to_config(self) -> Dict[str, str]:
        """Config echo with every default materialised, in a fixed key order"""
        return {
            "N": str(self.n),
            "MU": repr(float(self.mu)),
            "P": repr(float(self.p)),
            "R": repr(float(self.R)),
            "F_AMPLITUDE": repr(float(self.f_profile.amplitude)),
            "F_SMOOTHNESS": str(self.f_profile.smoothness),
            "G_AMPLITUDE": repr(float(self.g_profile.amplitude)),
            "G_SMOOTHNESS": str(self.g_profile.smoothness),
            "DR": repr(float(self.grid.dr)),
            "CFL": repr(float(self.grid.cfl)),
            "T_MAX": repr(float(self.grid.t_max)),
            "BLOWUP_THRESHOLD": repr(float(self.blowup_threshold)),
            "OUTPUT_STRIDE": str(self.output_stride),
        }

    @classmethod
    def from_mapping(cls, values: Mapping[str, Optional[str]]) -> "ProblemSpec":
        """Build a spec from KEY=VALUE strings (keys case-insensitive)"""
        merged = dict(CONFIG_DEFAULTS)
        merged.update({k.strip().upper(): v for k, v in values.items() if v is not None})

        missing = [k for k in REQUIRED_KEYS if k not in merged]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        unknown = sorted(set(merged) - set(CONFIG_DEFAULTS) - set(REQUIRED_KEYS))
        if unknown:
            logger.warning(f"Ignoring unknown config keys: {unknown}")

        try:
            return cls(
                n=_parse_int(merged["N"]),
                mu=float(merged["MU"]),
                p=float(merged["P"]),
                R=float(merged["R"]),
                f_profile=BumpProfile(float(merged["F_AMPLITUDE"]), _parse_int(merged["F_SMOOTHNESS"])),
                g_profile=BumpProfile(float(merged["G_AMPLITUDE"]), _parse_int(merged["G_SMOOTHNESS"])),
                grid=GridParams(float(merged["DR"]), float(merged["CFL"]), float(merged["T_MAX"])),
                blowup_threshold=float(merged["BLOWUP_THRESHOLD"]),
                output_stride=_parse_int(merged["OUTPUT_STRIDE"]),
            )
        except ValueError as e:
            if isinstance(e, InvalidArgument):
                raise
            raise ConfigError(f"cannot parse config value: {e}") from e


def _parse_int(text: str) -> int:
    value = float(text)
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def load_config(path: Union[str, Path]) -> ProblemSpec:
    """Read a flat KEY=VALUE config file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    logger.info(f"Loaded config {path} with keys {sorted(values)}")
    return ProblemSpec.from_mapping(values)


def write_config(spec: ProblemSpec, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for key, value in spec.to_config().items():
            f.write(f"{key}={value}\n")
    return path
