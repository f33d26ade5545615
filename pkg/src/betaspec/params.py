"""Parameter records for the limiting regime and finite sample sizes.

``SpectralParams`` carries the limit ratios (y, Y, alpha) together with the
entry-law moments that enter the CLT; ``FiniteDims`` carries (p, n, N) and
derives the finite-sample ratios. Every analytic formula in the package
takes a ``SpectralParams``, so centering at finite-sample ratios is one
constructor call away from the limit regime.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    BadMoment,
    DegenerateRegime,
    DimensionMismatch,
    IntervalCollapse,
    NonPositive,
)

__all__ = [
    "SpectralParams",
    "FiniteDims",
    "validate_params",
    "spectral_bounds",
    "analyticity_interval",
    "read_config",
    "write_config",
]


@dataclass(frozen=True)
class SpectralParams:
    """Limiting regime: ratios y = lim p/n, Y = lim p/N, alpha = lim N/n.

    ``tau`` is 1 for real entries and 0 for complex ones; ``m4_x`` and
    ``m4_xx`` are the fourth absolute moments of the two entry laws.
    Defaults give the real-Gaussian profile.
    """

    y: float
    Y: float
    alpha: float
    tau: int = 1
    m4_x: float = 3.0
    m4_xx: float = 3.0

    @classmethod
    def from_dims(cls, dims: FiniteDims, tau: int = 1,
                  m4_x: float = 3.0, m4_xx: float = 3.0) -> "SpectralParams":
        """Finite-sample ratios packaged as a limit-regime record."""
        return validate_params(cls(dims.y_n, dims.Y_N, dims.alpha_n,
                                   tau=tau, m4_x=m4_x, m4_xx=m4_xx))

    def with_moments(self, tau: int, m4_x: float, m4_xx: float) -> "SpectralParams":
        return validate_params(replace(self, tau=tau, m4_x=m4_x, m4_xx=m4_xx))


@dataclass(frozen=True)
class FiniteDims:
    """Sample dimensions: p variables, n and N observations per group."""

    p: int
    n: int
    N: int

    def __post_init__(self):
        for name in ("p", "n", "N"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise DimensionMismatch(f"{name} must be a positive integer, got {v!r}")
        if self.p >= self.n + self.N:
            raise DimensionMismatch(
                f"need p < n + N for an invertible pencil, got p={self.p}, n+N={self.n + self.N}")

    @property
    def y_n(self) -> float:
        return self.p / self.n

    @property
    def Y_N(self) -> float:
        return self.p / self.N

    @property
    def alpha_n(self) -> float:
        return self.N / self.n

    @property
    def c_n(self) -> float:
        return self.n / (self.n + self.N)

    @property
    def c_N(self) -> float:
        return self.N / (self.n + self.N)

    def c_n_exact(self) -> Fraction:
        return Fraction(self.n, self.n + self.N)

    def c_N_exact(self) -> Fraction:
        return Fraction(self.N, self.n + self.N)

    def alpha_n_exact(self) -> Fraction:
        return Fraction(self.N, self.n)


def validate_params(params: SpectralParams) -> SpectralParams:
    """Check the regime conditions and return the record unchanged.

    Raises ``NonPositive``, ``DegenerateRegime`` or ``BadMoment``.
    """
    y, Y, alpha = params.y, params.Y, params.alpha
    for name, v in (("y", y), ("Y", Y), ("alpha", alpha)):
        if not np.isfinite(v) or v <= 0:
            raise NonPositive(f"{name} must be positive and finite, got {v!r}")
    ratio = y * Y / (y + Y)
    if not 0.0 < ratio < 1.0:
        raise DegenerateRegime(f"yY/(y+Y) = {ratio} must lie strictly in (0,1)")
    if params.tau not in (0, 1):
        raise BadMoment(f"tau must be 0 or 1, got {params.tau!r}")
    for name, m in (("m4_x", params.m4_x), ("m4_xx", params.m4_xx)):
        if not np.isfinite(m) or m < 1.0:
            raise BadMoment(f"{name} must be >= 1 (unit variance), got {m!r}")
    return params


def spectral_bounds(params: SpectralParams) -> tuple[float, float]:
    """Almost-sure bounds (nu1, nu2) on the extreme eigenvalues of S + alpha*T."""
    validate_params(params)
    y, Y, alpha = params.y, params.Y, params.alpha
    r = np.sqrt(y * Y / (y + Y))
    scale = 1.0 + y / Y
    nu1 = min(1.0, alpha * Y / y) * scale * (1.0 - r) ** 2
    nu2 = max(1.0, alpha * Y / y) * scale * (1.0 + r) ** 2
    return nu1, nu2


def analyticity_interval(params: SpectralParams) -> tuple[float, float]:
    """Interval [c_l, c_r] on which CLT test functions must be analytic."""
    _, nu2 = spectral_bounds(params)
    c_l = (1.0 - np.sqrt(params.y)) ** 2 / nu2
    c_r = 1.0 - params.alpha * (1.0 - np.sqrt(params.Y)) ** 2 / nu2
    if c_l >= c_r:
        raise IntervalCollapse(f"c_l={c_l} >= c_r={c_r} for {params}")
    return c_l, c_r


# --- flat key-value config files -------------------------------------------

_CONFIG_KEYS = ("y", "Y", "alpha", "tau", "m4_x", "m4_xx", "p", "n", "N", "seed")
_INT_KEYS = {"tau", "p", "n", "N", "seed"}


def read_config(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = int(val) if key in _INT_KEYS else float(val)
    return out


def write_config(values: dict, path: str | Path) -> None:
    """Write config entries in canonical key order."""
    lines = [f"{k} = {values[k]!r}" for k in _CONFIG_KEYS if k in values]
    Path(path).write_text("\n".join(lines) + "\n")


def params_from_config(cfg: dict) -> SpectralParams:
    kwargs = {}
    for key in ("tau", "m4_x", "m4_xx"):
        if key in cfg:
            kwargs[key] = cfg[key]
    if all(k in cfg for k in ("y", "Y", "alpha")):
        return validate_params(SpectralParams(cfg["y"], cfg["Y"], cfg["alpha"], **kwargs))
    if all(k in cfg for k in ("p", "n", "N")):
        return SpectralParams.from_dims(dims_from_config(cfg), **kwargs)
    raise ValueError("config must supply either (y, Y, alpha) or (p, n, N)")


def dims_from_config(cfg: dict) -> FiniteDims:
    try:
        return FiniteDims(cfg["p"], cfg["n"], cfg["N"])
    except KeyError as exc:
        raise ValueError(f"config missing dimension key {exc}") from exc
