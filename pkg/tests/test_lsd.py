import numpy as np
import pytest
from scipy.integrate import quad

from betaspec import (
    SpectralParams,
    density_from_stieltjes,
    f_matrix_density,
    f_matrix_pushforward_check,
    lsd_atoms,
    lsd_cdf,
    lsd_density,
    lsd_model,
    mp_atom,
    mp_cdf,
    mp_density,
    mp_stieltjes,
    stieltjes_s,
    support_edges,
)
from betaspec.errors import BranchAmbiguity, QuadratureFailure
from betaspec.lsd import _check_stieltjes, bulk_expectation, mp_edges

SYM = SpectralParams(0.5, 0.5, 1.0)
GRID = [SpectralParams(y, Y, a) for y in (0.25, 0.5, 0.9) for Y in (0.25, 0.5, 0.9)
        for a in (0.5, 1.0, 2.0)]
ATOMIC = [SpectralParams(2.0, 0.5, 1.0), SpectralParams(0.5, 2.0, 1.0),
          SpectralParams(2.0, 0.25, 0.5)]


# --- edges and atoms ---------------------------------------------------------

def test_edges_symmetric_case():
    t_l, t_r = support_edges(SYM)
    assert t_l == pytest.approx(0.0669873, abs=1e-7)
    assert t_r == pytest.approx(0.9330127, abs=1e-7)


@pytest.mark.parametrize("y", [0.25, 0.5, 0.9])
def test_edges_sum_to_one_in_symmetric_regime(y):
    t_l, t_r = support_edges(SpectralParams(y, y, 1.0))
    assert abs(t_l + t_r - 1.0) <= 1e-12


@pytest.mark.parametrize("params", GRID + ATOMIC)
def test_edges_are_roots_of_the_discriminant(params):
    y, Y, alpha = params.y, params.Y, params.alpha
    quad_poly = lambda t: 4 * alpha * t * (1 - t) - ((1 - y) * (1 - t) + alpha * t * (1 - Y)) ** 2
    t_l, t_r = support_edges(params)
    assert abs(quad_poly(t_l)) <= 1e-10
    assert abs(quad_poly(t_r)) <= 1e-10
    # independent oracle: roots of the expanded quadratic
    A = alpha * (1 - Y) - (1 - y)
    roots = np.sort(np.roots([-(A ** 2 + 4 * alpha), 4 * alpha - 2 * (1 - y) * A,
                              -((1 - y) ** 2)]))
    assert np.allclose(roots, [t_l, t_r], atol=1e-12)


def test_atoms():
    assert lsd_atoms(SpectralParams(2.0, 0.5, 1.0)) == (0.5, 0.0)
    assert lsd_atoms(SYM) == (0.0, 0.0)
    assert lsd_atoms(SpectralParams(0.5, 2.0, 1.0)) == (0.0, 0.5)


def test_model_fields():
    m = lsd_model(SYM)
    assert m.t_l < m.t_r and m.disc == pytest.approx(4.0)
    assert m.atom0 == 0.0 and m.atom1 == 0.0


# --- density -----------------------------------------------------------------

def test_density_symmetric_midpoint():
    # closed form at the center reduces to 2*sqrt(3)/pi
    assert lsd_density(SYM, 0.5) == pytest.approx(2 * np.sqrt(3) / np.pi, abs=1e-12)


def test_density_outside_support_is_zero():
    assert lsd_density(SYM, 0.03) == 0.0
    assert lsd_density(SYM, 0.98) == 0.0
    t_l, t_r = support_edges(SYM)
    assert lsd_density(SYM, t_l) == 0.0 and lsd_density(SYM, t_r) == 0.0


def test_density_mirror_symmetry():
    ts = np.linspace(0.05, 0.95, 181)
    assert np.allclose(lsd_density(SYM, ts), lsd_density(SYM, 1 - ts), atol=1e-12)


@pytest.mark.parametrize("params", GRID + ATOMIC)
def test_normalization(params):
    atom0, atom1 = lsd_atoms(params)
    assert abs(atom0 + atom1 + bulk_expectation(params) - 1.0) <= 1e-6


@pytest.mark.parametrize("params", GRID[::5])
def test_swap_duality(params):
    # the law of I - B is the law of B with (y, Y, alpha) -> (Y, y, 1/alpha)
    swapped = SpectralParams(params.Y, params.y, 1.0 / params.alpha)
    ts = np.linspace(0.02, 0.98, 97)
    assert np.allclose(lsd_density(params, ts), lsd_density(swapped, 1 - ts),
                       atol=1e-10)
    a0, a1 = lsd_atoms(params)
    b0, b1 = lsd_atoms(swapped)
    assert (a0, a1) == (b1, b0)


# --- cdf -----------------------------------------------------------------------

def test_cdf_boundaries():
    assert lsd_cdf(SYM, -0.1) == 0.0
    assert lsd_cdf(SYM, 1.0) == pytest.approx(1.0, abs=1e-6)
    assert lsd_cdf(SYM, 1.7) == pytest.approx(1.0, abs=1e-6)


def test_cdf_symmetric_median():
    assert lsd_cdf(SYM, 0.5) == pytest.approx(0.5, abs=1e-8)


def test_cdf_atom_jump():
    params = SpectralParams(2.0, 0.5, 1.0)
    assert lsd_cdf(params, 1e-6) == pytest.approx(0.5, abs=1e-12)


def test_cdf_monotone():
    xs = np.linspace(-0.1, 1.1, 61)
    vals = [lsd_cdf(SYM, x) for x in xs]
    assert np.all(np.diff(vals) >= -1e-12)


def test_quadrature_failure_surfaced():
    with pytest.raises(QuadratureFailure):
        bulk_expectation(SYM, err_cap=0.0)


# --- Stieltjes transform --------------------------------------------------------

def test_stieltjes_upper_half_plane_property():
    rng = np.random.default_rng(1)
    for params in (SYM, SpectralParams(0.9, 0.25, 2.0), SpectralParams(2.0, 0.5, 1.0)):
        for _ in range(100):
            z = complex(rng.uniform(-2, 3), 10 ** rng.uniform(-6, 1))
            assert stieltjes_s(params, z).imag > 0


def test_stieltjes_conjugate_symmetry():
    z = 0.3 + 0.4j
    assert stieltjes_s(SYM, np.conj(z)) == pytest.approx(np.conj(stieltjes_s(SYM, z)))


def test_stieltjes_total_mass_asymptotic():
    z = 1e6j
    assert abs(z * stieltjes_s(SYM, z) + 1.0) <= 1e-4


@pytest.mark.parametrize("params", [SYM, SpectralParams(0.9, 0.25, 2.0)])
def test_stieltjes_solves_self_consistent_equation(params):
    # independent oracle: plug s into the defining integral against the MP law
    y, Y, alpha = params.y, params.Y, params.alpha
    a, b = mp_edges(Y)
    for z in (0.3 + 0.5j, -0.5 + 1.0j, 2.0 + 0.25j):
        s = stieltjes_s(params, z)
        c = 1 - y * (1 - z) * (z * s + 1)

        def kernel(t):
            return (c + alpha * t) / ((1 - z) * c - alpha * z * t)

        re, _ = quad(lambda t: (kernel(t) * mp_density(Y, t)).real, a, b, limit=300)
        im, _ = quad(lambda t: (kernel(t) * mp_density(Y, t)).imag, a, b, limit=300)
        assert abs(s - (re + 1j * im)) <= 1e-8


def test_stieltjes_atom_recovery():
    # -z s(z) -> atom0 along the imaginary axis; one Richardson step removes
    # the O(z) contribution of the regular part
    params = SpectralParams(2.0, 0.5, 1.0)
    g = lambda eps: -1e0j * eps * stieltjes_s(params, complex(0, eps))
    extrapolated = 2 * g(5e-6) - g(1e-5)
    assert abs(extrapolated - 0.5) <= 1e-8


def test_stieltjes_real_axis_matches_quadrature():
    for x in (-0.5, 0.99999e-2, 2.5):  # left of 0, in the gap (0, t_l), right of 1
        s = stieltjes_s(SYM, x)
        assert abs(s.imag) == 0.0
        oracle = bulk_expectation(SYM, lambda t: 1.0 / (t - x))
        assert s.real == pytest.approx(oracle, abs=1e-8)


def test_stieltjes_real_axis_continuity():
    for x in (-0.5, 0.03, 2.5):
        assert stieltjes_s(SYM, x) == pytest.approx(stieltjes_s(SYM, x + 1e-9j),
                                                    abs=1e-6)


def test_stieltjes_rejects_support_points():
    with pytest.raises(ValueError):
        stieltjes_s(SYM, 0.5)
    with pytest.raises(ValueError):
        stieltjes_s(SYM, 0.0)


def test_branch_checker_flags_corrupt_values():
    with pytest.raises(BranchAmbiguity):
        _check_stieltjes(np.array([1j]), np.array([-1j]), unit_interval=True)


# --- density recovery -------------------------------------------------------------

def test_density_recovery_interior():
    got = density_from_stieltjes(SYM, 0.5, 1e-4)
    want = lsd_density(SYM, 0.5)
    assert abs(got - want) / want <= 0.01


def test_density_recovery_outside_support():
    assert density_from_stieltjes(SYM, 3.0, 1e-6) <= 1e-4


def test_density_recovery_first_order_in_eps():
    t_l, t_r = support_edges(SYM)
    xs = np.linspace(t_l + 0.15, t_r - 0.15, 7)
    err = lambda eps: np.mean([abs(density_from_stieltjes(SYM, x, eps)
                                   - lsd_density(SYM, x)) for x in xs])
    ratio = err(5e-4) / err(1e-3)
    assert 0.3 <= ratio <= 0.7


# --- Marchenko-Pastur --------------------------------------------------------------

def test_mp_density_values():
    assert mp_density(1.0, 1.0) == pytest.approx(np.sqrt(3) / (2 * np.pi), abs=1e-12)
    assert mp_density(0.25, 1.0) == pytest.approx(np.sqrt(1.25 * 0.75) / (0.5 * np.pi),
                                                  abs=1e-12)


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0, 2.0])
def test_mp_normalization(ratio):
    a, b = mp_edges(ratio)
    mid = 0.5 * (a + b)
    i1, _ = quad(lambda u: 2 * u * mp_density(ratio, a + u * u), 0, np.sqrt(mid - a))
    i2, _ = quad(lambda u: 2 * u * mp_density(ratio, b - u * u), 0, np.sqrt(b - mid))
    assert abs(mp_atom(ratio) + i1 + i2 - 1.0) <= 1e-9


def test_mp_stieltjes_at_minus_one():
    # quadrature oracle for MP(1): integral of f(t)/(t+1) equals (sqrt(5)-1)/2
    got = mp_stieltjes(1.0, -1.0)
    assert got.imag == 0.0
    a, b = mp_edges(1.0)
    mid = 0.5 * (a + b)
    i1, _ = quad(lambda u: 2 * u * mp_density(1.0, a + u * u) / (a + u * u + 1),
                 0, np.sqrt(mid - a))
    i2, _ = quad(lambda u: 2 * u * mp_density(1.0, b - u * u) / (b - u * u + 1),
                 0, np.sqrt(b - mid))
    assert got.real == pytest.approx(i1 + i2, abs=1e-9)
    assert got.real == pytest.approx(0.618034, abs=1e-6)


def test_mp_stieltjes_upper_half_plane():
    rng = np.random.default_rng(2)
    for ratio in (0.25, 1.0, 2.0):
        for _ in range(50):
            z = complex(rng.uniform(-2, 6), 10 ** rng.uniform(-5, 1))
            s = mp_stieltjes(ratio, z)
            assert s.imag > 0
    z = 1e7j
    assert abs(z * mp_stieltjes(0.5, z) + 1.0) <= 1e-5


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0, 2.0])
def test_mp_cdf_matches_quadrature(ratio):
    a, b = mp_edges(ratio)
    for x in np.linspace(a + 1e-9, b - 1e-9, 9):
        lim = np.sqrt(x - a)
        v, _ = quad(lambda u: 2 * u * mp_density(ratio, a + u * u), 0, lim,
                    epsabs=1e-12)
        assert mp_cdf(ratio, x) == pytest.approx(mp_atom(ratio) + v, abs=1e-9)
    assert mp_cdf(ratio, b + 1) == 1.0
    assert mp_cdf(ratio, -0.1) == 0.0


# --- pushforward consistency ---------------------------------------------------------

@pytest.mark.parametrize("params", [SYM, SpectralParams(0.9, 0.25, 2.0)])
def test_pushforward_residual(params):
    assert f_matrix_pushforward_check(params) <= 1e-6


def test_pushforward_outside_support():
    t_l, t_r = support_edges(SYM)
    for t in (t_l / 2, (1 + t_r) / 2):
        lhs = lsd_density(SYM, t)
        rhs = f_matrix_density(SYM, t / (1 - t)) / (1 - t) ** 2
        assert lhs == 0.0 and rhs == 0.0


def test_f_matrix_density_requires_invertible_second_sample():
    with pytest.raises(ValueError):
        f_matrix_density(SpectralParams(0.5, 2.0, 1.0), 1.0)
