"""Contour evaluation of the CLT mean and covariance functionals.

Rectangular contours around the transformed spectral interval carry
Gauss-Legendre nodes per side; every differential is reduced analytically
to an integrand times dz through the closed-form derivative of the triple
transform, and the covariance kernel is integrated by parts once so only a
first-order pole separates the two nested contours.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .errors import (
    ContourCollision,
    ImaginaryResidue,
    QuadratureFailure,
    SingularContour,
    SingularPoint,
    VarianceNonpositive,
)
from .params import SpectralParams, analyticity_interval, validate_params
from .transforms import chain_grid

__all__ = [
    "TestFunction",
    "identity_fn",
    "log_fn",
    "invdiff_fn",
    "loglinear_fn",
    "quad_l5_fn",
    "polynomial_fn",
    "Contour",
    "base_interval",
    "build_contour",
    "nested_contours",
    "clt_mean",
    "clt_cov",
    "GaussianLimit",
    "gaussian_limit",
]

IMAG_DISCARD_TOL = 1e-8   # imaginary residue recorded in diagnostics
IMAG_FAULT_TOL = 1e-6     # beyond this the branch/contour is considered broken
COV_MIN_NODES = 256       # coarser grids are useless for the double integral

_chain_cache: dict = {}


def _chain_on(params: SpectralParams, contour: "Contour"):
    """chain_grid memoized by contour geometry; shared across integrals."""
    key = (params, contour.base_lo, contour.base_hi, contour.delta_h,
           contour.delta_v, contour.nodes_per_side)
    hit = _chain_cache.get(key)
    if hit is None:
        if len(_chain_cache) > 64:
            _chain_cache.clear()
        hit = _chain_cache[key] = chain_grid(params, contour.nodes)
    return hit


# --- test functions ----------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Analytic test function with closed-form derivative.

    ``undefined_atoms`` lists spectrum endpoints (0 and/or 1) where the
    function diverges, which blocks centering against a law carrying an
    atom there. ``domain`` describes the analyticity requirement: entire
    functions always qualify; 're_positive' needs c_l > 0 and 'unit_strip'
    additionally needs c_r < 1.
    """

    name: str
    fn: Callable
    deriv: Callable
    undefined_atoms: frozenset = field(default_factory=frozenset)
    domain: str = "entire"

    def check_analytic(self, params: SpectralParams) -> None:
        c_l, c_r = analyticity_interval(params)
        if self.domain in ("re_positive", "unit_strip") and c_l <= 0:
            raise ValueError(f"{self.name} requires c_l > 0, got c_l={c_l}")
        if self.domain == "unit_strip" and c_r >= 1:
            raise ValueError(f"{self.name} requires c_r < 1, got c_r={c_r}")


def identity_fn() -> TestFunction:
    return TestFunction("identity", lambda x: x, lambda x: np.ones_like(np.asarray(x)))


def log_fn() -> TestFunction:
    return TestFunction("log", np.log, lambda x: 1.0 / x,
                        frozenset({0.0}), "re_positive")


def invdiff_fn(alpha: float) -> TestFunction:
    """(1-x)/(alpha*x), the trace-of-ratio integrand."""
    return TestFunction(
        "invdiff",
        lambda x: (1.0 - x) / (alpha * x),
        lambda x: -1.0 / (alpha * x ** 2),
        frozenset({0.0}), "re_positive",
    )


def loglinear_fn(n: int, N: int) -> TestFunction:
    """n*log(x/c_n) + N*log((1-x)/c_N), the log-likelihood-ratio integrand."""
    c_n, c_N = n / (n + N), N / (n + N)
    return TestFunction(
        "loglinear",
        lambda x: n * np.log(x / c_n) + N * np.log((1.0 - x) / c_N),
        lambda x: n / x - N / (1.0 - x),
        frozenset({0.0, 1.0}), "unit_strip",
    )


def quad_l5_fn(n: int, N: int) -> TestFunction:
    """c_n*(x/c_n - 1)^2 + c_N*((1-x)/c_N - 1)^2, the squared-deviation integrand."""
    c_n, c_N = n / (n + N), N / (n + N)
    return TestFunction(
        "quad_l5",
        lambda x: c_n * (x / c_n - 1.0) ** 2 + c_N * ((1.0 - x) / c_N - 1.0) ** 2,
        lambda x: 2.0 * (x / c_n - 1.0) - 2.0 * ((1.0 - x) / c_N - 1.0),
    )


def polynomial_fn(coeffs) -> TestFunction:
    """Polynomial with ascending coefficients."""
    poly = np.polynomial.Polynomial(coeffs)
    dpoly = poly.deriv()
    return TestFunction(f"poly{len(poly.coef) - 1}", poly, dpoly)


# --- contours ----------------------------------------------------------------

@dataclass(frozen=True)
class Contour:
    """Counterclockwise rectangle around [base_lo, base_hi] with GL nodes."""

    base_lo: float
    base_hi: float
    delta_h: float
    delta_v: float
    nodes_per_side: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def perimeter(self) -> float:
        width = self.base_hi - self.base_lo + 2 * self.delta_h
        return 2.0 * (width + 2 * self.delta_v)

    def refined(self, factor: int = 2) -> "Contour":
        nodes, weights = _gl_rectangle(self.base_lo, self.base_hi,
                                       self.delta_h, self.delta_v,
                                       self.nodes_per_side * factor)
        return Contour(self.base_lo, self.base_hi, self.delta_h, self.delta_v,
                       self.nodes_per_side * factor, nodes, weights)


def _gl_rectangle(a: float, b: float, dh: float, dv: float, n: int):
    """Gauss-Legendre nodes/weights per side of the rectangle, CCW.

    Even n keeps every node off the real axis; weights sum to the perimeter
    in modulus since the GL weights on each side sum to its length.
    """
    x, gw = legendre.leggauss(n)
    corners = np.array([a - dh - 1j * dv, b + dh - 1j * dv,
                        b + dh + 1j * dv, a - dh + 1j * dv])
    nodes, weights = [], []
    for k in range(4):
        z0, z1 = corners[k], corners[(k + 1) % 4]
        mid, half = 0.5 * (z0 + z1), 0.5 * (z1 - z0)
        nodes.append(mid + half * x)
        weights.append(gw * half)
    return np.concatenate(nodes), np.concatenate(weights)


def base_interval(params: SpectralParams) -> tuple[float, float]:
    """Image of [c_l, c_r] under t -> alpha*t/(1-t); the interval to enclose."""
    c_l, c_r = analyticity_interval(params)
    alpha = params.alpha
    return alpha * c_l / (1 - c_l), alpha * c_r / (1 - c_r)


def _default_margins(a: float, b: float):
    base = min(0.25 * (b - a), 0.5)
    return min(base, 0.5 * a), base


def build_contour(params: SpectralParams, delta_h: float | None = None,
                  delta_v: float | None = None, nodes_per_side: int = 64,
                  probe: bool = True) -> Contour:
    """Rectangle enclosing the base interval, validated against singularities.

    The left edge must stay right of the origin (branch points and the
    possible atom image live at z <= 0), so delta_h < base_lo is enforced.
    """
    validate_params(params)
    a, b = base_interval(params)
    dh_def, dv_def = _default_margins(a, b)
    dh = dh_def if delta_h is None else float(delta_h)
    dv = dv_def if delta_v is None else float(delta_v)
    if dv <= 0 or dh <= 0:
        raise SingularContour(f"margins must be positive, got delta_h={dh}, delta_v={dv}")
    if a - dh <= 0:
        raise SingularContour(
            f"left edge {a - dh:.3e} <= 0; need delta_h < {a:.3e} to keep the origin outside")
    if nodes_per_side < 4 or nodes_per_side % 2:
        raise ValueError("nodes_per_side must be an even integer >= 4")
    nodes, weights = _gl_rectangle(a, b, dh, dv, nodes_per_side)
    contour = Contour(a, b, dh, dv, nodes_per_side, nodes, weights)
    if probe:
        try:
            chain_grid(params, nodes)
        except SingularPoint as exc:
            raise SingularContour(f"contour hits a singular point: {exc}") from exc
    return contour


def nested_contours(params: SpectralParams, delta_h: float | None = None,
                    delta_v: float | None = None,
                    nodes_per_side: int = 64) -> tuple[Contour, Contour]:
    """(inner, outer) rectangles for the covariance double integral.

    The outer margins double the inner ones where the geometry allows;
    horizontal margins are clipped to keep both left edges positive while
    staying strictly nested.
    """
    a, b = base_interval(params)
    dh_def, dv_def = _default_margins(a, b)
    dh = dh_def if delta_h is None else float(delta_h)
    dv = dv_def if delta_v is None else float(delta_v)
    dh_in = min(dh, 0.5 * a)
    dh_out = min(2 * dh, 0.75 * a)
    inner = build_contour(params, dh_in, dv, nodes_per_side)
    outer = build_contour(params, dh_out, 2 * dv, nodes_per_side)
    return inner, outer


def _strictly_nested(inner: Contour, outer: Contour) -> bool:
    return (inner.base_lo == outer.base_lo and inner.base_hi == outer.base_hi
            and outer.delta_h > inner.delta_h and outer.delta_v > inner.delta_v)


# --- mean --------------------------------------------------------------------

def _mean_coeffs(params: SpectralParams):
    tau, m4x, m4xx = params.tau, params.m4_x, params.m4_xx
    return (tau / 2.0, tau / 2.0, (m4x - tau - 2.0) * params.y, (m4xx - tau - 2.0) / 2.0)


def _mean_integrand(f: TestFunction, params: SpectralParams, z: np.ndarray) -> np.ndarray:
    """Integrand of the mean functional (all four terms) at contour nodes."""
    y, Y, alpha = params.y, params.Y, params.alpha
    c1, c2, c3, c4 = _mean_coeffs(params)
    s3, s3p = chain_grid(params, z)
    F = f.fn(z / (alpha + z))
    P = (1 - Y) * s3 ** 2 + 2 * s3 + 1 - y
    Q = P + y
    Pp = 2 * ((1 - Y) * s3 + 1)
    g = 1 - Y * s3 ** 2 / (1 + s3) ** 2
    gp = -2 * Y * s3 / (1 + s3) ** 3
    total = np.zeros_like(s3)
    if c1:
        total += c1 * F * (Pp / P - Pp / Q) * s3p
    if c2:
        total += c2 * F * (gp / g) * s3p
    if c3:
        total += c3 * F / (s3 + 1) ** 3 * s3p
    if c4:
        total += c4 * F * gp * s3p
    return total


def _mean_once(f, params, contour) -> complex:
    vals = _mean_integrand(f, params, contour.nodes,
                           chain=_chain_on(params, contour))
    return complex(np.sum(contour.weights * vals) / (2j * np.pi))


def _check_imag(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_FAULT_TOL:
        raise ImaginaryResidue(f"{what} kept imaginary part {value.imag:.3e}")
    return abs(value.imag)


def _mean_adaptive(f, params, contour, tol, max_refine):
    if not any(_mean_coeffs(params)):
        return 0.0, {"imag": 0.0, "nodes_per_side": 0}
    try:
        prev = _mean_once(f, params, contour)
        for _ in range(max_refine):
            contour = contour.refined()
            cur = _mean_once(f, params, contour)
            if abs(cur - prev) <= tol:
                imag = _check_imag(cur, "mean integral")
                return float(cur.real), {"imag": imag, "nodes_per_side": contour.nodes_per_side}
            prev = cur
    except SingularPoint as exc:
        raise SingularContour(f"mean integrand hit a singular point: {exc}") from exc
    raise QuadratureFailure(
        f"mean integral not converged to {tol} at {contour.nodes_per_side} nodes/side")


def clt_mean(f: TestFunction, params: SpectralParams, contour: Contour | None = None,
             *, tol: float = 1e-8, max_refine: int = 6) -> float:
    """Asymptotic mean of the centered linear spectral statistic for f.

    Node counts double until successive values differ by at most ``tol``;
    the imaginary residue must stay below 1e-6 or ``ImaginaryResidue`` is
    raised.
    """
    validate_params(params)
    f.check_analytic(params)
    if contour is None:
        contour = build_contour(params)
    value, _ = _mean_adaptive(f, params, contour, tol, max_refine)
    return value


# --- covariance ----------------------------------------------------------------

def _single_integral(h, params, contour, s3, s3p):
    """(2 pi i)^-1 times the contour integral of h(x) s3'/(s3+1)^2 dz."""
    alpha = params.alpha
    x = contour.nodes / (alpha + contour.nodes)
    vals = h.fn(x) * s3p / (s3 + 1) ** 2
    return np.sum(contour.weights * vals) / (2j * np.pi)


def _pole_sum(a_outer, s3_outer, b_inner, s3_inner, chunk=256):
    """sum_jk a_j b_k / (s3_outer_j - s3_inner_k), chunked; tracks min separation."""
    total = 0.0 + 0.0j
    min_sep = np.inf
    for start in range(0, a_outer.size, chunk):
        stop = start + chunk
        d = s3_outer[start:stop, None] - s3_inner[None, :]
        min_sep = min(min_sep, float(np.abs(d).min()))
        total += np.sum(a_outer[start:stop, None] * b_inner[None, :] / d)
    return total, min_sep


def _cov_once(f, g, params, inner, outer) -> complex:
    alpha = params.alpha
    tau = params.tau
    s3_in, s3p_in = chain_grid(params, inner.nodes)
    s3_out, s3p_out = chain_grid(params, outer.nodes)
    x_in = inner.nodes / (alpha + inner.nodes)
    x_out = outer.nodes / (alpha + outer.nodes)
    # first term, integrated by parts in the outer variable: the derivative
    # of f o (z -> z/(alpha+z)) rides the outer contour against a simple pole
    jac_out = alpha / (alpha + outer.nodes) ** 2
    b_in_g = inner.weights * g.fn(x_in) * s3p_in
    a_out_f = outer.weights * f.deriv(x_out) * jac_out
    sum_fg, sep1 = _pole_sum(a_out_f, s3_out, b_in_g, s3_in)
    b_in_f = inner.weights * f.fn(x_in) * s3p_in
    a_out_g = outer.weights * g.deriv(x_out) * jac_out
    sum_gf, sep2 = _pole_sum(a_out_g, s3_out, b_in_f, s3_in)
    if min(sep1, sep2) < 1e-10:
        raise ContourCollision(f"transform images separate by only {min(sep1, sep2):.2e}")
    c1 = (tau + 1) * 0.5 * (sum_fg + sum_gf) / (2j * np.pi) ** 2
    coef2 = params.y * (params.m4_x - tau - 2) + params.Y * (params.m4_xx - tau - 2)
    if coef2:
        i_f = _single_integral(f, params, inner, s3_in, s3p_in)
        i_g = _single_integral(g, params, inner, s3_in, s3p_in)
        c1 += coef2 * i_f * i_g
    return complex(c1)


def _cov_adaptive(f, g, params, contour_pair, tol, max_refine):
    inner, outer = contour_pair
    if not _strictly_nested(inner, outer):
        raise ContourCollision(
            "covariance needs strictly nested contours (inner margins < outer margins)")
    try:
        prev = _cov_once(f, g, params, inner, outer)
        for _ in range(max_refine):
            inner, outer = inner.refined(), outer.refined()
            cur = _cov_once(f, g, params, inner, outer)
            if abs(cur - prev) <= tol:
                imag = _check_imag(cur, "covariance integral")
                return float(cur.real), {"imag": imag, "nodes_per_side": inner.nodes_per_side}
            prev = cur
    except SingularPoint as exc:
        raise SingularContour(f"covariance integrand hit a singular point: {exc}") from exc
    raise QuadratureFailure(
        f"covariance integral not converged to {tol} at {inner.nodes_per_side} nodes/side")


def clt_cov(f: TestFunction, g: TestFunction, params: SpectralParams,
            contour_pair: tuple[Contour, Contour] | None = None,
            *, tol: float = 1e-8, max_refine: int = 6) -> float:
    """Asymptotic covariance of the centered statistics for f and g.

    Symmetrized over which function rides which contour, so the result is
    exactly invariant under swapping f and g.
    """
    validate_params(params)
    f.check_analytic(params)
    g.check_analytic(params)
    if contour_pair is None:
        contour_pair = nested_contours(params)
    value, _ = _cov_adaptive(f, g, params, contour_pair, tol, max_refine)
    return value


# --- joint limit ----------------------------------------------------------------

@dataclass(frozen=True)
class GaussianLimit:
    """Mean vector and covariance matrix of the limiting Gaussian vector."""

    mean: np.ndarray
    cov: np.ndarray
    diagnostics: dict


def gaussian_limit(fs, params: SpectralParams, *, delta_h: float | None = None,
                   delta_v: float | None = None, nodes_per_side: int = 64,
                   tol: float = 1e-8) -> GaussianLimit:
    """Joint Gaussian limit for a list of test functions."""
    validate_params(params)
    contour = build_contour(params, delta_h, delta_v, nodes_per_side)
    pair = nested_contours(params, delta_h, delta_v, nodes_per_side)
    k = len(fs)
    mean = np.zeros(k)
    cov = np.zeros((k, k))
    max_imag = 0.0
    nodes_used = 0
    for i, f in enumerate(fs):
        f.check_analytic(params)
        mean[i], info = _mean_adaptive(f, params, contour, tol, 6)
        max_imag = max(max_imag, info["imag"])
        nodes_used = max(nodes_used, info["nodes_per_side"])
    for i in range(k):
        for j in range(i, k):
            cov[i, j], info = _cov_adaptive(fs[i], fs[j], params, pair, tol, 6)
            cov[j, i] = cov[i, j]
            max_imag = max(max_imag, info["imag"])
            nodes_used = max(nodes_used, info["nodes_per_side"])
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() < -1e-8:
        raise VarianceNonpositive(f"covariance matrix has eigenvalue {eigs.min():.3e}")
    if eigs.min() < 0:
        w, V = np.linalg.eigh(cov)
        cov = (V * np.clip(w, 0, None)) @ V.T
        cov = 0.5 * (cov + cov.T)
    diagnostics = {
        "max_imag": float(max_imag),
        "nodes_per_side": int(nodes_used),
        "contour": {"base_lo": float(contour.base_lo), "base_hi": float(contour.base_hi),
                    "delta_h": float(contour.delta_h), "delta_v": float(contour.delta_v)},
    }
    return GaussianLimit(mean, cov, diagnostics)
