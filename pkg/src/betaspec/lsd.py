"""Closed-form limiting spectral law of B = S(S + alpha*T)^-1.

Support edges, atoms, density, CDF and Stieltjes transform of the limit
law, the Marchenko-Pastur law (density, CDF, transform), density recovery
from Stieltjes boundary values, and the pushforward consistency check
against the companion ratio-matrix law.

Branch convention: on the upper half plane every square root is taken
with nonnegative imaginary part, which selects the unique root satisfying
the Stieltjes-transform constraints of the underlying measure; the lower
half plane is reached by conjugate reflection, and real arguments off the
support are resolved by continuity from above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import BranchAmbiguity, QuadratureFailure
from .params import SpectralParams, validate_params

__all__ = [
    "LsdModel",
    "lsd_model",
    "support_edges",
    "lsd_atoms",
    "lsd_density",
    "lsd_cdf",
    "bulk_expectation",
    "stieltjes_s",
    "density_from_stieltjes",
    "mp_edges",
    "mp_atom",
    "mp_density",
    "mp_cdf",
    "mp_stieltjes",
    "f_matrix_density",
    "f_matrix_pushforward_check",
]

_PROBE_IM = 1e-6      # imaginary offset used to resolve real-axis branches
_REAL_TOL = 1e-12     # |Im z| below this counts as a real argument


def _edge_coeffs(params: SpectralParams) -> tuple[float, float]:
    """(A, D): linear coefficient A = alpha(1-Y)-1+y and discriminant D = A^2+4alpha."""
    A = params.alpha * (1.0 - params.Y) - 1.0 + params.y
    return A, A * A + 4.0 * params.alpha


def support_edges(params: SpectralParams) -> tuple[float, float]:
    """Endpoints (t_l, t_r) of the absolutely continuous part of the limit law."""
    validate_params(params)
    y, Y, alpha = params.y, params.Y, params.alpha
    A, D = _edge_coeffs(params)
    c = 2.0 * alpha - (1.0 - y) * A
    r = 2.0 * alpha * np.sqrt(y - y * Y + Y)
    return (c - r) / D, (c + r) / D


def lsd_atoms(params: SpectralParams) -> tuple[float, float]:
    """Point masses at 0 and 1: max(0, 1-1/y) and max(0, 1-1/Y)."""
    validate_params(params)
    return max(0.0, 1.0 - 1.0 / params.y), max(0.0, 1.0 - 1.0 / params.Y)


@dataclass(frozen=True)
class LsdModel:
    """Limit law summary: edges, atoms and the edge discriminant."""

    params: SpectralParams
    t_l: float
    t_r: float
    atom0: float
    atom1: float
    disc: float

    def density(self, t):
        return lsd_density(self.params, t)

    def cdf(self, x):
        return lsd_cdf(self.params, x)


def lsd_model(params: SpectralParams) -> LsdModel:
    t_l, t_r = support_edges(params)
    atom0, atom1 = lsd_atoms(params)
    _, D = _edge_coeffs(params)
    return LsdModel(params, t_l, t_r, atom0, atom1, D)


def lsd_density(params: SpectralParams, t):
    """Density of the limit law; zero outside (t_l, t_r), continuous at the edges."""
    t_l, t_r = support_edges(params)
    y, Y, alpha = params.y, params.Y, params.alpha
    _, D = _edge_coeffs(params)
    t = np.asarray(t, dtype=float)
    inside = (t > t_l) & (t < t_r)
    out = np.zeros_like(t)
    ti = t[inside]
    num = np.sqrt(D * (t_r - ti) * (ti - t_l))
    den = 2.0 * np.pi * ti * (1.0 - ti) * (y * (1.0 - ti) + alpha * ti * Y)
    out[inside] = num / den
    return out if out.ndim else float(out)


def bulk_expectation(params: SpectralParams, g=None, lo: float | None = None,
                     hi: float | None = None, *, tol: float = 1e-11,
                     err_cap: float = 1e-8) -> float:
    """Integral of g(t) against the bulk density over [lo, hi].

    The square-root edge behaviour is tamed by substituting u^2 = t - t_l
    on the left half and u^2 = t_r - t on the right half, so the adaptive
    rule sees a smooth integrand. Raises ``QuadratureFailure`` when the
    reported error estimate exceeds ``err_cap``.
    """
    t_l, t_r = support_edges(params)
    lo = t_l if lo is None else max(lo, t_l)
    hi = t_r if hi is None else min(hi, t_r)
    if hi <= lo:
        return 0.0
    if g is None:
        g = lambda t: 1.0
    mid = 0.5 * (t_l + t_r)
    total, err = 0.0, 0.0

    def left_piece(u):
        t = t_l + u * u
        return 2.0 * u * g(t) * lsd_density(params, t)

    def right_piece(u):
        t = t_r - u * u
        return 2.0 * u * g(t) * lsd_density(params, t)

    if lo < mid:
        u0, u1 = np.sqrt(lo - t_l), np.sqrt(min(hi, mid) - t_l)
        v, e = quad(left_piece, u0, u1, epsabs=tol, epsrel=tol, limit=300)
        total, err = total + v, err + e
    if hi > mid:
        u0, u1 = np.sqrt(t_r - hi), np.sqrt(t_r - max(lo, mid))
        v, e = quad(right_piece, u0, u1, epsabs=tol, epsrel=tol, limit=300)
        total, err = total + v, err + e
    if err > err_cap:
        raise QuadratureFailure(f"bulk integral error estimate {err:.2e} > {err_cap:.0e}")
    return total


def lsd_cdf(params: SpectralParams, x) -> float:
    """CDF of the limit law: atoms at 0 and 1 plus the bulk integral."""
    atom0, atom1 = lsd_atoms(params)
    t_l, t_r = support_edges(params)
    x = float(x)
    if x < 0.0:
        return 0.0
    val = atom0
    if x > t_l:
        val += bulk_expectation(params, hi=x, tol=1e-10)
    if x >= 1.0:
        val += atom1
    return min(1.0, max(0.0, val))


# --- Stieltjes transform of the limit law ----------------------------------

def _s_upper(params: SpectralParams, z):
    """Transform on the open upper half plane (vectorized, Im z > 0 assumed)."""
    y, Y, alpha = params.y, params.Y, params.alpha
    z = np.asarray(z, dtype=complex)
    R = ((1 - y) * (1 - z) + alpha * z * (1 - Y)) ** 2 - 4 * alpha * z * (1 - z)
    w = np.sqrt(R)
    w = np.where(w.imag >= 0, w, -w)
    D = 2 * z * (1 - z) * (y * (1 - z) + alpha * z * Y)
    s = ((1 + y) * (1 - z) - alpha * z * (1 - Y) + w) / D - 1 / z
    _check_stieltjes(z, s, unit_interval=True)
    return s


def _check_stieltjes(z, s, unit_interval: bool):
    """Verify the selected branch is the transform of a measure on [0,1] or [0,inf)."""
    slack = 1e-9 * np.maximum(1.0, np.abs(s))
    ok = (s.imag > -slack) & ((z * s).imag > -slack)
    if unit_interval:
        ok &= (((z - 1) * s).imag < slack)
    if not np.all(ok):
        bad = np.asarray(z)[~np.asarray(ok)]
        raise BranchAmbiguity(f"no Stieltjes branch at z={bad.ravel()[:3]}")


def _real_axis_value(upper_fn, candidates_fn, z: float):
    """Resolve a real argument by continuity from the upper half plane.

    Both real branch candidates are computed exactly; the one closer to
    the value just above the axis is returned, so the only approximation
    is in the discrete selection, not in the value.
    """
    probe = upper_fn(complex(z, _PROBE_IM))
    c_plus, c_minus = candidates_fn(z)
    return c_plus if abs(c_plus - probe) <= abs(c_minus - probe) else c_minus


def stieltjes_s(params: SpectralParams, z) -> complex:
    """Stieltjes transform s(z) of the limit law.

    ``z`` may be anywhere off the real axis, or real but outside the
    support and away from the atoms at 0 and 1.
    """
    validate_params(params)
    z = complex(z)
    if z.imag > _REAL_TOL:
        return complex(_s_upper(params, z))
    if z.imag < -_REAL_TOL:
        return complex(np.conj(_s_upper(params, np.conj(z))))

    t_l, t_r = support_edges(params)
    x = z.real
    if t_l <= x <= t_r or abs(x) < 1e-12 or abs(x - 1.0) < 1e-12:
        raise ValueError(f"real argument {x} lies on the support or at an atom")

    def candidates(xr):
        y, Y, alpha = params.y, params.Y, params.alpha
        R = ((1 - y) * (1 - xr) + alpha * xr * (1 - Y)) ** 2 - 4 * alpha * xr * (1 - xr)
        w = np.sqrt(R)  # R > 0 off the support
        D = 2 * xr * (1 - xr) * (y * (1 - xr) + alpha * xr * Y)
        core = (1 + y) * (1 - xr) - alpha * xr * (1 - Y)
        return (core + w) / D - 1 / xr, (core - w) / D - 1 / xr

    return complex(_real_axis_value(lambda zz: _s_upper(params, zz), candidates, x))


def density_from_stieltjes(params: SpectralParams, x: float, eps: float) -> float:
    """Density recovered as pi^-1 Im s(x + i*eps); converges as eps -> 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(stieltjes_s(params, complex(x, eps)).imag / np.pi)


def _s_upper_deriv(params: SpectralParams, z):
    """d/dz of the transform on the upper half plane, branch-consistent."""
    y, Y, alpha = params.y, params.Y, params.alpha
    z = np.asarray(z, dtype=complex)
    inner = (1 - y) * (1 - z) + alpha * z * (1 - Y)
    d_inner = -(1 - y) + alpha * (1 - Y)
    R = inner ** 2 - 4 * alpha * z * (1 - z)
    w = np.sqrt(R)
    w = np.where(w.imag >= 0, w, -w)
    dw = (2 * inner * d_inner - 4 * alpha * (1 - 2 * z)) / (2 * w)
    D = 2 * z * (1 - z) * (y * (1 - z) + alpha * z * Y)
    dD = 2 * (1 - 2 * z) * (y * (1 - z) + alpha * z * Y) + 2 * z * (1 - z) * (alpha * Y - y)
    N = (1 + y) * (1 - z) - alpha * z * (1 - Y) + w
    dN = -(1 + y) - alpha * (1 - Y) + dw
    return (dN * D - N * dD) / D ** 2 + 1 / z ** 2


# --- Marchenko-Pastur law ---------------------------------------------------

def mp_edges(ratio: float) -> tuple[float, float]:
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    return (1 - np.sqrt(ratio)) ** 2, (1 + np.sqrt(ratio)) ** 2


def mp_atom(ratio: float) -> float:
    """Mass at the origin, max(0, 1 - 1/ratio)."""
    return max(0.0, 1.0 - 1.0 / ratio)


def mp_density(ratio: float, x):
    """Bulk density of the Marchenko-Pastur law (atom reported separately)."""
    a, b = mp_edges(ratio)
    x = np.asarray(x, dtype=float)
    inside = (x > a) & (x < b)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((b - xi) * (xi - a)) / (2 * np.pi * xi * ratio)
    return out if out.ndim else float(out)


def mp_cdf(ratio: float, x: float) -> float:
    """Closed-form CDF (atom at 0 included)."""
    a, b = mp_edges(ratio)
    atom = mp_atom(ratio)
    if x < 0:
        return 0.0
    if x <= a:
        return atom
    if x >= b:
        return 1.0
    r = np.sqrt((b - x) * (x - a))
    t1 = 0.5 * (a + b) * np.arcsin((2 * x - a - b) / (b - a))
    if a > 0:
        t2 = np.sqrt(a * b) * np.arcsin(((a + b) * x - 2 * a * b) / (x * (b - a)))
        base = (0.5 * (a + b) - np.sqrt(a * b)) * (-np.pi / 2)
    else:
        t2 = 0.0
        base = 0.5 * (a + b) * (-np.pi / 2)
    return atom + (r + t1 - t2 - base) / (2 * np.pi * ratio)


def _mp_upper(ratio: float, z):
    """MP transform on the open upper half plane (vectorized)."""
    z = np.asarray(z, dtype=complex)
    Q = (z - 1 - ratio) ** 2 - 4 * ratio
    q = np.sqrt(Q)
    q = np.where(q.imag >= 0, q, -q)
    s = (1 - ratio - z + q) / (2 * ratio * z)
    _check_stieltjes(z, s, unit_interval=False)
    return s


def mp_stieltjes(ratio: float, z) -> complex:
    """Stieltjes transform of the MP law; decays like -1/z at infinity."""
    z = complex(z)
    if z.imag > _REAL_TOL:
        return complex(_mp_upper(ratio, z))
    if z.imag < -_REAL_TOL:
        return complex(np.conj(_mp_upper(ratio, np.conj(z))))
    a, b = mp_edges(ratio)
    x = z.real
    if a <= x <= b or abs(x) < 1e-12:
        raise ValueError(f"real argument {x} lies on the MP support or at the origin")

    def candidates(xr):
        q = np.sqrt((xr - 1 - ratio) ** 2 - 4 * ratio)
        return (1 - ratio - xr + q) / (2 * ratio * xr), (1 - ratio - xr - q) / (2 * ratio * xr)

    return complex(_real_axis_value(lambda zz: _mp_upper(ratio, zz), candidates, x))


def _mp_upper_deriv(ratio: float, z):
    """d/dz of the MP transform on the upper half plane, branch-consistent."""
    z = np.asarray(z, dtype=complex)
    Q = (z - 1 - ratio) ** 2 - 4 * ratio
    q = np.sqrt(Q)
    q = np.where(q.imag >= 0, q, -q)
    dq = (z - 1 - ratio) / q
    num = (-1 + dq) * z - (1 - ratio - z + q)
    return num / (2 * ratio * z ** 2)


# --- ratio-matrix (S T^-1) law and the pushforward identity -----------------

def f_matrix_density(params: SpectralParams, x):
    """Bulk density of the limit law of S T^-1 (requires Y < 1).

    Free of alpha; the atom at 0 of mass max(0, 1-1/y) is not included.
    """
    if params.Y >= 1:
        raise ValueError("ratio-matrix law requires Y < 1")
    y, Y = params.y, params.Y
    x = np.asarray(x, dtype=float)
    Q = ((1 - y) + x * (1 - Y)) ** 2 - 4 * x
    inside = (Q < 0) & (x > 0)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt(-Q[inside]) / (2 * np.pi * xi * (y + Y * xi))
    return out if out.ndim else float(out)


def f_matrix_pushforward_check(params: SpectralParams, n_grid: int = 400) -> float:
    """Sup residual of density(t) == f_ratio(alpha*t/(1-t)) * alpha/(1-t)^2.

    The left side is the displayed limit-law density; the right side pushes
    the alpha-free ratio-matrix law forward through t -> alpha*t/(1-t).
    """
    t_l, t_r = support_edges(params)
    alpha = params.alpha
    ts = np.linspace(t_l, t_r, n_grid + 2)[1:-1]
    lhs = lsd_density(params, ts)
    rhs = f_matrix_density(params, alpha * ts / (1 - ts)) * alpha / (1 - ts) ** 2
    return float(np.max(np.abs(lhs - rhs)))
