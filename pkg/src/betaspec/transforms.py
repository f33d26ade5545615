"""Transform chain feeding the CLT, identity suite, and the fixed-point solver.

The chain reparameterizes the base transform s three times: s_dot is the
transform of the companion ratio-matrix law, s_ddot its companion form, and
s_dddot composes with the Marchenko-Pastur transform. All CLT contour
integrands reduce to rational functions of s_dddot and its closed-form
derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import NoConvergence, NotInUpperHalfPlane, SingularPoint
from .lsd import (
    _mp_upper_deriv,
    _s_upper_deriv,
    mp_atom,
    mp_cdf,
    mp_density,
    mp_edges,
    mp_stieltjes,
    stieltjes_s,
)
from .params import SpectralParams, validate_params

__all__ = [
    "TransformState",
    "transform_state",
    "chain_grid",
    "lemma51_residuals",
    "LEMMA51_LABELS",
    "DiscreteLaw",
    "fixed_point_solve",
]

_SINGULAR_TOL = 1e-14


@dataclass(frozen=True)
class TransformState:
    """Values of the transform chain at one point z off the real axis.

    ``s`` is the base transform evaluated at z/(alpha+z), so every other
    field is recomputable from the previous one.
    """

    z: complex
    s: complex
    s_dot: complex
    s_ddot: complex
    s_dddot: complex
    s_dddot_prime: complex


def _dddot_prime_closed(params: SpectralParams, s3):
    """Closed-form derivative of the triple transform, in terms of itself."""
    den = (1 - params.Y) * s3 ** 2 + 2 * s3 + 1 - params.y
    return -((1 - params.Y) * s3 + 1) ** 2 / den, den


def transform_state(params: SpectralParams, z: complex) -> TransformState:
    """Evaluate the full chain at a single z with Im z != 0, z != -alpha."""
    validate_params(params)
    z = complex(z)
    if abs(z.imag) < 1e-12:
        raise ValueError("transform chain requires z off the real axis")
    if abs(z + params.alpha) < 1e-12:
        raise ValueError("z = -alpha is a pole of the reparameterization")
    y, Y, alpha = params.y, params.Y, params.alpha
    w = z / (alpha + z)
    s = stieltjes_s(params, w)
    s_dot = alpha / (alpha + z) ** 2 * s - 1 / (alpha + z)
    s_ddot = -(1 - y) / z + y * s_dot
    if abs(s_ddot) < _SINGULAR_TOL:
        raise SingularPoint(f"s_ddot vanished at z={z}")
    s_dddot = Y * mp_stieltjes(Y, -s_ddot) + (1 - Y) / s_ddot
    s3p, den = _dddot_prime_closed(params, s_dddot)
    if abs(den) < _SINGULAR_TOL:
        raise SingularPoint(f"derivative denominator vanished at z={z}")
    return TransformState(z, s, s_dot, s_ddot, s_dddot, s3p)


def chain_grid(params: SpectralParams, z: np.ndarray):
    """Vectorized (s_dddot, s_dddot_prime) for arrays of z off the real axis.

    Used by the contour quadratures; conjugate symmetry handles the lower
    half plane.
    """
    from .lsd import _mp_upper, _s_upper  # vectorized upper-half-plane cores

    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) < 1e-12):
        raise SingularPoint("contour node on the real axis")
    y, Y, alpha = params.y, params.Y, params.alpha
    upper = z.imag > 0
    zu = np.where(upper, z, np.conj(z))
    w = zu / (alpha + zu)
    s = _s_upper(params, w)
    s_dot = alpha / (alpha + zu) ** 2 * s - 1 / (alpha + zu)
    s_ddot = -(1 - y) / zu + y * s_dot
    if np.any(np.abs(s_ddot) < _SINGULAR_TOL):
        raise SingularPoint("s_ddot vanished on the grid")
    s3 = Y * np.conj(_mp_upper(Y, np.conj(-s_ddot))) + (1 - Y) / s_ddot
    s3p, den = _dddot_prime_closed(params, s3)
    if np.any(np.abs(den) < _SINGULAR_TOL):
        raise SingularPoint("derivative denominator vanished on the grid")
    s3 = np.where(upper, s3, np.conj(s3))
    s3p = np.where(upper, s3p, np.conj(s3p))
    return s3, s3p


def _chain_derivative(params: SpectralParams, z: complex, state: TransformState):
    """(s_ddot', s_dddot') by analytic differentiation through the chain.

    Independent of the closed forms stated in terms of s_dddot alone, so the
    identity suite can compare the two routes.
    """
    y, Y, alpha = params.y, params.Y, params.alpha
    z = complex(z)
    upper = z.imag > 0
    zu = z if upper else np.conj(z)
    w = zu / (alpha + zu)
    sp = complex(_s_upper_deriv(params, w))
    s = state.s if upper else np.conj(state.s)
    s_dot_prime = (-2 * alpha / (alpha + zu) ** 3 * s
                   + alpha ** 2 / (alpha + zu) ** 4 * sp
                   + 1 / (alpha + zu) ** 2)
    s_ddot_prime = (1 - y) / zu ** 2 + y * s_dot_prime
    s_ddot = state.s_ddot if upper else np.conj(state.s_ddot)
    mp_d = complex(np.conj(_mp_upper_deriv(Y, np.conj(-s_ddot))))
    s3_prime = (-Y * mp_d - (1 - Y) / s_ddot ** 2) * s_ddot_prime
    if not upper:
        return np.conj(s_ddot_prime), np.conj(s3_prime)
    return s_ddot_prime, s3_prime


def _mp_expectation(ratio: float, g, *, tol: float = 1e-11) -> complex:
    """Integral of a complex-valued g against the MP law (bulk + atom)."""
    a, b = mp_edges(ratio)
    mid = 0.5 * (a + b)

    def piece(real, left):
        if left:
            f = lambda u: 2 * u * g(a + u * u) * mp_density(ratio, a + u * u)
            lim = np.sqrt(mid - a)
        else:
            f = lambda u: 2 * u * g(b - u * u) * mp_density(ratio, b - u * u)
            lim = np.sqrt(b - mid)
        part = (lambda u: f(u).real) if real else (lambda u: f(u).imag)
        v, _ = quad(part, 0.0, lim, epsabs=tol, epsrel=tol, limit=300)
        return v

    val = complex(piece(True, True) + piece(True, False),
                  piece(False, True) + piece(False, False))
    atom = mp_atom(ratio)
    if atom > 0:
        val += atom * g(0.0)
    return val


LEMMA51_LABELS = (
    "inverse_map",
    "companion_from_triple",
    "triple_derivative",
    "resolvent_integral",
    "weighted_resolvent_integral",
    "companion_derivative_a",
    "companion_derivative_b",
)


def lemma51_residuals(params: SpectralParams, z: complex) -> np.ndarray:
    """Absolute residuals of the transform identities at one point.

    Order: (i) the inverse map z(s_dddot); (ii) s_ddot in terms of s_dddot;
    (iii) closed-form s_dddot' vs the chain-rule derivative; (iv)-(v) the two
    MP resolvent integrals; (vi) both closed forms of s_ddot'. Integrals are
    evaluated by quadrature against the MP density at tolerance 1e-11.
    """
    st = transform_state(params, z)
    y, Y = params.y, params.Y
    u = st.s_dddot
    L = (1 - Y) * u + 1
    sdd_chain_prime, s3_chain_prime = _chain_derivative(params, z, st)

    r1 = abs(z + u * (u + 1 - y) / L)
    r2 = abs(st.s_ddot - L / (u * (u + 1)))
    r3 = abs(s3_chain_prime - st.s_dddot_prime)
    i4 = _mp_expectation(Y, lambda t: 1.0 / (st.s_ddot + t))
    r4 = abs(i4 - u / L)
    i5 = _mp_expectation(Y, lambda t: t / (st.s_ddot + t) ** 2)
    r5 = abs(i5 - u ** 2 / ((1 - Y) * u ** 2 + 2 * u + 1))
    expr_a = -((1 - Y) * u ** 2 + 2 * u + 1) / (u ** 2 * (u + 1) ** 2) * st.s_dddot_prime
    expr_b = -(1 - Y * u ** 2 / (1 + u) ** 2) / u ** 2 * st.s_dddot_prime
    r6a = abs(sdd_chain_prime - expr_a)
    r6b = abs(sdd_chain_prime - expr_b)
    return np.array([r1, r2, r3, r4, r5, r6a, r6b])


# --- general self-consistent equation ---------------------------------------

@dataclass(frozen=True)
class DiscreteLaw:
    """Discrete spectral law: nonnegative atom locations with unit total mass."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "weights", wts)
        if locs.shape != wts.shape or locs.ndim != 1 or locs.size == 0:
            raise ValueError("locations and weights must be matching 1-d arrays")
        if not np.all(np.isfinite(locs)) or np.any(locs < 0):
            raise ValueError("locations must be finite and nonnegative")
        if np.any(wts <= 0):
            raise ValueError("weights must be positive")
        if abs(wts.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {wts.sum()}, expected 1 within 1e-12")

    @classmethod
    def point_mass(cls, loc: float) -> "DiscreteLaw":
        return cls(np.array([loc], dtype=float), np.array([1.0]))

    @classmethod
    def from_mp(cls, ratio: float, k: int) -> "DiscreteLaw":
        """Equal-mass atoms at the MP quantiles (i+1/2)/k; deterministic."""
        a, b = mp_edges(ratio)
        atom = mp_atom(ratio)
        qs = (np.arange(k) + 0.5) / k
        locs = np.zeros(k)
        for i, q in enumerate(qs):
            if q > atom:
                locs[i] = brentq(lambda x: mp_cdf(ratio, x) - q, a, b,
                                 xtol=1e-14, rtol=8.9e-16)
        return cls(locs, np.full(k, 1.0 / k))


def fixed_point_solve(law: DiscreteLaw, y: float, alpha: float, z: complex,
                      init: complex | None = None, *, omega: float = 0.5,
                      tol: float = 1e-10, max_iter: int = 10000) -> complex:
    """Solve the self-consistent equation for the base transform under law F^A.

    Damped iteration s <- (1-w)s + w*RHS(s); the damping drops to 0.1 after
    three consecutive residual increases. The converged point must lie in
    the upper half plane.
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("fixed-point equation is posed on the upper half plane")
    t = law.locations
    wts = law.weights
    s = 1j if init is None else complex(init)

    def rhs(sv):
        c = 1 - y * (1 - z) * (z * sv + 1)
        return complex(np.sum(wts * (c + alpha * t) / ((1 - z) * c - alpha * z * t)))

    prev_res = np.inf
    bad_streak = 0
    for _ in range(max_iter):
        nxt = rhs(s)
        res = abs(nxt - s)
        if res <= tol:
            if nxt.imag <= 0:
                raise NotInUpperHalfPlane(f"converged to {nxt} with Im <= 0")
            return nxt
        if res > prev_res:
            bad_streak += 1
            if bad_streak >= 3:
                omega = 0.1
        else:
            bad_streak = 0
        prev_res = res
        s = (1 - omega) * s + omega * nxt
    raise NoConvergence(f"residual {res:.3e} after {max_iter} iterations at z={z}")
