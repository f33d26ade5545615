"""Two-sample covariance-equality statistics and their CLT calibration.

The five classical statistics are linear spectral statistics of the Beta
matrix formed from the two sample covariances; each is centered at the
limit law evaluated at finite-sample ratios, shifted and scaled by the CLT
mean and variance, and reported with a normal p-value.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .clt import (
    TestFunction,
    build_contour,
    clt_cov,
    clt_mean,
    identity_fn,
    invdiff_fn,
    log_fn,
    loglinear_fn,
    nested_contours,
    quad_l5_fn,
)
from .errors import (
    AtomDivergence,
    DegenerateEigenvalue,
    DimensionMismatch,
    VarianceNonpositive,
)
from .lsd import bulk_expectation, lsd_atoms
from .params import FiniteDims, SpectralParams, validate_params
from .sampling import EigenSpectrum, beta_spectrum_from_cov

__all__ = [
    "Statistic",
    "LssValue",
    "TestReport",
    "compute_lss",
    "test_function_for",
    "center_term",
    "calibrate",
    "covariance_equality_test",
    "load_matrix_csv",
    "read_bspc",
    "write_bspc",
]

_EIG_DEGENERATE_TOL = 1e-12


class Statistic(enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"
    L5 = "L5"

    @classmethod
    def parse(cls, name: str) -> "Statistic":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown statistic {name!r}; choose L1..L5") from None


@dataclass(frozen=True)
class LssValue:
    which: Statistic
    value: float
    dims: FiniteDims


@dataclass(frozen=True)
class TestReport:
    """Calibrated test outcome: z = (value - centering - mean_shift)/sqrt(variance)."""

    statistic: LssValue
    centering: float
    mean_shift: float
    variance: float
    z_score: float
    p_value: float
    demeaned: bool = False

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic.which.value,
            "value": self.statistic.value,
            "dims": {"p": self.statistic.dims.p, "n": self.statistic.dims.n,
                     "N": self.statistic.dims.N},
            "centering": self.centering,
            "mean_shift": self.mean_shift,
            "variance": self.variance,
            "z_score": self.z_score,
            "p_value": self.p_value,
            "demeaned": self.demeaned,
        }


def _degenerate_gate(lam: np.ndarray, which: Statistic, check_upper: bool) -> None:
    if lam[0] <= _EIG_DEGENERATE_TOL:
        raise DegenerateEigenvalue(
            f"{which.value} undefined: eigenvalue {lam[0]:.3e} at 0 (singular first sample)")
    if check_upper and lam[-1] >= 1.0 - _EIG_DEGENERATE_TOL:
        raise DegenerateEigenvalue(
            f"{which.value} undefined: eigenvalue {lam[-1]:.6f} at 1 (singular second sample)")


def compute_lss(spec: EigenSpectrum, which: Statistic,
                dims: FiniteDims | None = None) -> LssValue:
    """Evaluate one of the five statistics on a Beta spectrum."""
    dims = spec.dims if dims is None else dims
    lam = spec.values
    n, N = dims.n, dims.N
    c_n, c_N, alpha_n = dims.c_n, dims.c_N, dims.alpha_n
    if which is Statistic.L1:
        _degenerate_gate(lam, which, check_upper=True)
        value = float(np.sum(n * np.log(lam / c_n) + N * np.log((1 - lam) / c_N)))
    elif which is Statistic.L2:
        _degenerate_gate(lam, which, check_upper=False)
        value = float(np.sum((1 - lam) / (alpha_n * lam)))
    elif which is Statistic.L3:
        _degenerate_gate(lam, which, check_upper=True)
        value = float(np.sum(np.log(lam)))
    elif which is Statistic.L4:
        value = float(np.sum(lam))
    else:
        value = float(c_n * np.sum((lam / c_n - 1) ** 2)
                      + c_N * np.sum(((1 - lam) / c_N - 1) ** 2))
    return LssValue(which, value, dims)


def test_function_for(which: Statistic, dims: FiniteDims) -> TestFunction:
    """The analytic integrand whose spectral sum equals the statistic."""
    if which is Statistic.L1:
        return loglinear_fn(dims.n, dims.N)
    if which is Statistic.L2:
        return invdiff_fn(dims.alpha_n)
    if which is Statistic.L3:
        return log_fn()
    if which is Statistic.L4:
        return identity_fn()
    return quad_l5_fn(dims.n, dims.N)


def center_term(f: TestFunction, params: SpectralParams, p: int,
                *, tol: float = 1e-10) -> float:
    """p times the integral of f against the limit law at the given ratios."""
    validate_params(params)
    atom0, atom1 = lsd_atoms(params)
    if atom0 > 0 and 0.0 in f.undefined_atoms:
        raise AtomDivergence(f"{f.name} diverges at the atom at 0 (mass {atom0:.4f})")
    if atom1 > 0 and 1.0 in f.undefined_atoms:
        raise AtomDivergence(f"{f.name} diverges at the atom at 1 (mass {atom1:.4f})")
    total = bulk_expectation(params, lambda t: float(np.real(f.fn(t))), tol=tol)
    if atom0 > 0:
        total += atom0 * float(np.real(f.fn(0.0)))
    if atom1 > 0:
        total += atom1 * float(np.real(f.fn(1.0)))
    return p * total


@lru_cache(maxsize=128)
def _calibration(params: SpectralParams, which: Statistic, dims: FiniteDims,
                 delta_h: float | None, delta_v: float | None,
                 nodes_per_side: int) -> tuple[float, float, float]:
    """(centering, mean_shift, variance); cached since replicates share it."""
    f = test_function_for(which, dims)
    finite = SpectralParams.from_dims(dims, tau=params.tau,
                                      m4_x=params.m4_x, m4_xx=params.m4_xx)
    centering = center_term(f, finite, dims.p)
    contour = build_contour(params, delta_h, delta_v, nodes_per_side)
    pair = nested_contours(params, delta_h, delta_v, nodes_per_side)
    mean_shift = clt_mean(f, params, contour)
    variance = clt_cov(f, f, params, pair)
    return centering, mean_shift, variance


def calibrate(stat: LssValue, params: SpectralParams, *,
              delta_h: float | None = None, delta_v: float | None = None,
              nodes_per_side: int = 64, one_sided: bool = False,
              demeaned: bool = False) -> TestReport:
    """Asymptotic calibration of a computed statistic.

    Centering uses the finite-sample ratios of ``stat.dims``; the mean
    shift and variance use ``params`` (the limit regime, or the same
    ratios when no separate limit is known).
    """
    validate_params(params)
    test_function_for(stat.which, stat.dims).check_analytic(params)
    centering, mean_shift, variance = _calibration(
        params, stat.which, stat.dims, delta_h, delta_v, nodes_per_side)
    if variance <= 1e-12:
        raise VarianceNonpositive(f"calibrated variance {variance:.3e} is not positive")
    z = (stat.value - centering - mean_shift) / np.sqrt(variance)
    if one_sided:
        p_value = 0.5 * erfc(z / np.sqrt(2.0))
    else:
        p_value = erfc(abs(z) / np.sqrt(2.0))
    return TestReport(stat, centering, mean_shift, variance, float(z), float(p_value),
                      demeaned=demeaned)


def covariance_equality_test(data_a: np.ndarray, data_b: np.ndarray,
                             which: Statistic = Statistic.L4, *,
                             alpha: float | None = None, demean: bool = False,
                             tau: int = 1, m4_x: float = 3.0, m4_xx: float = 3.0,
                             delta_h: float | None = None,
                             delta_v: float | None = None,
                             nodes_per_side: int = 64,
                             one_sided: bool = False) -> TestReport:
    """Full pipeline from two data matrices (rows = variables) to a report.

    Data are assumed mean-zero; with ``demean`` each variable is centered
    across observations and one degree of freedom is dropped per sample.
    """
    A = np.asarray(data_a, dtype=float)
    B = np.asarray(data_b, dtype=float)
    if A.ndim != 2 or B.ndim != 2:
        raise DimensionMismatch("data matrices must be two-dimensional")
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatch(f"variable counts differ: {A.shape[0]} vs {B.shape[0]}")
    p, n = A.shape
    _, N = B.shape
    if demean:
        A = A - A.mean(axis=1, keepdims=True)
        B = B - B.mean(axis=1, keepdims=True)
        n, N = n - 1, N - 1
    if p >= n + N:
        raise DimensionMismatch(f"need p < n + N, got p={p}, n+N={n + N}")
    dims = FiniteDims(p, n, N)
    alpha_n = dims.alpha_n if alpha is None else float(alpha)
    S = A @ A.T / n
    T = B @ B.T / N
    spec = beta_spectrum_from_cov(S, T, alpha_n, dims)
    stat = compute_lss(spec, which, dims)
    params = SpectralParams.from_dims(dims, tau=tau, m4_x=m4_x, m4_xx=m4_xx)
    return calibrate(stat, params, delta_h=delta_h, delta_v=delta_v,
                     nodes_per_side=nodes_per_side, one_sided=one_sided,
                     demeaned=demean)


# --- data ingestion -----------------------------------------------------------

_BSPC_MAGIC = b"BSPC"


def load_matrix_csv(path: str | Path) -> np.ndarray:
    """Headerless CSV, rows = variables, columns = observations."""
    mat = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    return mat


def write_bspc(mat: np.ndarray, path: str | Path) -> None:
    """Binary blob: 16-byte header (magic 'BSPC', u32 p, u32 cols, u32 reserved)
    followed by column-major little-endian float64 data."""
    mat = np.asarray(mat, dtype="<f8")
    p, cols = mat.shape
    with open(path, "wb") as fh:
        fh.write(_BSPC_MAGIC + struct.pack("<III", p, cols, 0))
        fh.write(np.asfortranarray(mat).tobytes(order="F"))


def read_bspc(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != _BSPC_MAGIC:
        raise ValueError(f"{path}: not a BSPC blob")
    p, cols, _ = struct.unpack("<III", raw[4:16])
    expected = 16 + 8 * p * cols
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {p}x{cols}, got {len(raw)}")
    data = np.frombuffer(raw[16:], dtype="<f8")
    return data.reshape((p, cols), order="F").copy()
