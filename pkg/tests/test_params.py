import numpy as np
import pytest

from betaspec import (
    FiniteDims,
    SpectralParams,
    analyticity_interval,
    spectral_bounds,
    support_edges,
    validate_params,
)
from betaspec.errors import (
    BadMoment,
    DegenerateRegime,
    DimensionMismatch,
    NonPositive,
)
from betaspec.params import (
    dims_from_config,
    params_from_config,
    read_config,
    write_config,
)

GRID = [(y, Y, a) for y in (0.25, 0.5, 0.9) for Y in (0.25, 0.5, 0.9)
        for a in (0.5, 1.0, 2.0)]


def test_validate_accepts_baseline():
    p = SpectralParams(0.5, 0.5, 1.0, tau=1, m4_x=3.0, m4_xx=3.0)
    assert validate_params(p) is p


def test_validate_rejects_degenerate_ratio():
    with pytest.raises(DegenerateRegime):
        validate_params(SpectralParams(2.0, 2.0, 1.0))


def test_validate_rejects_nonpositive():
    with pytest.raises(NonPositive):
        validate_params(SpectralParams(0.5, 0.5, -1.0))
    with pytest.raises(NonPositive):
        validate_params(SpectralParams(0.0, 0.5, 1.0))


def test_validate_rejects_bad_moments():
    with pytest.raises(BadMoment):
        validate_params(SpectralParams(0.5, 0.5, 1.0, tau=2))
    with pytest.raises(BadMoment):
        validate_params(SpectralParams(0.5, 0.5, 1.0, m4_x=0.5))


def test_spectral_bounds_symmetric_case():
    nu1, nu2 = spectral_bounds(SpectralParams(0.5, 0.5, 1.0))
    assert nu1 == pytest.approx(0.5, abs=1e-12)
    assert nu2 == pytest.approx(4.5, abs=1e-12)


def test_spectral_bounds_alpha_two():
    # min/max prefactors are 1 and 2 here, the common factor is 2*(1 +- 1/2)^2
    nu1, nu2 = spectral_bounds(SpectralParams(0.5, 0.5, 2.0))
    assert nu1 == pytest.approx(0.5, abs=1e-12)
    assert nu2 == pytest.approx(9.0, abs=1e-12)


@pytest.mark.parametrize("y,Y,alpha", GRID)
def test_bounds_ordering(y, Y, alpha):
    nu1, nu2 = spectral_bounds(SpectralParams(y, Y, alpha))
    assert 0 < nu1 < nu2


def test_bounds_prefactor_scaling():
    # with alpha*Y/y >= 1 for both choices, nu1 is alpha-free and nu2 scales
    y, Y = 0.25, 0.5
    a1, a2 = 1.0, 2.0
    assert a1 * Y / y >= 1 and a2 * Y / y >= 1
    n1a, n2a = spectral_bounds(SpectralParams(y, Y, a1))
    n1b, n2b = spectral_bounds(SpectralParams(y, Y, a2))
    assert n1a == n1b
    assert n2b / n2a == pytest.approx(a2 / a1, rel=1e-12)


def test_analyticity_interval_symmetric_case():
    c_l, c_r = analyticity_interval(SpectralParams(0.5, 0.5, 1.0))
    assert c_l == pytest.approx(0.019064, abs=1e-6)
    assert c_r == pytest.approx(0.980936, abs=1e-6)


def test_analyticity_left_end_vanishes_at_y_one():
    c_l, _ = analyticity_interval(SpectralParams(1.0, 0.5, 1.0))
    assert c_l == 0.0


@pytest.mark.parametrize("y,Y,alpha", GRID)
def test_support_inside_analyticity_interval(y, Y, alpha):
    params = SpectralParams(y, Y, alpha)
    c_l, c_r = analyticity_interval(params)
    t_l, t_r = support_edges(params)
    assert 0 <= c_l < t_l < t_r < c_r <= 1


def test_finite_dims_ratios():
    d = FiniteDims(100, 200, 400)
    assert d.y_n == 0.5 and d.Y_N == 0.25 and d.alpha_n == 2.0


def test_finite_dims_exact_identities():
    for (p, n, N) in [(100, 200, 400), (7, 3, 11), (300, 150, 600), (5, 8, 12)]:
        d = FiniteDims(p, n, N)
        assert d.c_n_exact() + d.c_N_exact() == 1
        assert d.alpha_n_exact() * d.c_n_exact() == d.c_N_exact()


def test_finite_dims_rejects_fat_data():
    with pytest.raises(DimensionMismatch):
        FiniteDims(10, 4, 5)
    with pytest.raises(DimensionMismatch):
        FiniteDims(0, 4, 5)


def test_params_from_dims():
    p = SpectralParams.from_dims(FiniteDims(100, 200, 400))
    assert (p.y, p.Y, p.alpha) == (0.5, 0.25, 2.0)
    assert p.tau == 1 and p.m4_x == 3.0


def test_config_roundtrip(tmp_path):
    path = tmp_path / "run.cfg"
    write_config({"y": 0.5, "Y": 0.25, "alpha": 2.0, "tau": 0,
                  "m4_x": 2.0, "m4_xx": 2.0, "p": 100, "n": 200, "N": 400,
                  "seed": 7}, path)
    cfg = read_config(path)
    params = params_from_config(cfg)
    assert params == SpectralParams(0.5, 0.25, 2.0, tau=0, m4_x=2.0, m4_xx=2.0)
    assert dims_from_config(cfg) == FiniteDims(100, 200, 400)
    assert cfg["seed"] == 7


def test_config_from_dims_only(tmp_path):
    path = tmp_path / "dims.cfg"
    path.write_text("p = 100\nn = 200\nN = 400\n# comment\n")
    params = params_from_config(read_config(path))
    assert params.y == 0.5 and params.alpha == 2.0


def test_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("zz = 1\n")
    with pytest.raises(ValueError):
        read_config(path)
