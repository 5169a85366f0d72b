import math

import numpy as np
import pytest
from scipy import integrate

from evoincome.errors import NoStationaryDistributionError, SingularityError
from evoincome.prices import (
    PriceFluctParams,
    SubbotinTailParams,
    laplace_cdf,
    laplace_density,
    laplace_mean_abs,
    laplace_variance,
    price_ensemble,
    price_fluct_step,
    subbotin_tail_density,
    windowed_mean_abs,
)
from evoincome.sde import cumulative_trapezoid, stationary_density

COMP = PriceFluctParams(relaxation=0.5, amplitude=1.0)
NONCOMP = PriceFluctParams(relaxation=0.5, amplitude=1.0, regime="non_competitive")


def test_step_fixed_point():
    assert price_fluct_step(0.0, COMP, 1.0, 0.0) == 0.0


def test_step_restoring():
    assert price_fluct_step(1.0, COMP, 1.0, 0.0) == 0.5


def test_step_non_competitive_diverges():
    assert price_fluct_step(1.0, NONCOMP, 1.0, 0.0) == 1.5


def test_step_noise_variance_is_d_dt():
    assert price_fluct_step(0.0, PriceFluctParams(1.0, 4.0), 0.25, 1.0) == pytest.approx(1.0)


def test_laplace_density_values():
    p = PriceFluctParams(1.0, 2.0)
    assert laplace_density(0.0, p) == 0.5
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(laplace_density(x, p) / 0.5, np.exp(-np.abs(x)), rtol=1e-15)


def test_laplace_moments_by_quadrature():
    p = PriceFluctParams(1.0, 2.0)
    norm = integrate.quad(lambda x: laplace_density(x, p), -np.inf, np.inf)[0]
    var = integrate.quad(lambda x: x * x * laplace_density(x, p), -np.inf, np.inf)[0]
    mabs = integrate.quad(lambda x: abs(x) * laplace_density(x, p), -np.inf, np.inf)[0]
    assert norm == pytest.approx(1.0, abs=1e-10)
    assert var == pytest.approx(2.0, rel=1e-8) == laplace_variance(p)
    assert mabs == pytest.approx(laplace_mean_abs(p), rel=1e-8)


def test_laplace_cdf_matches_density():
    p = PriceFluctParams(0.7, 1.3)
    for x in (-2.0, -0.1, 0.0, 0.4, 3.0):
        num = integrate.quad(lambda v: laplace_density(v, p), -np.inf, x)[0]
        assert laplace_cdf(x, p) == pytest.approx(num, abs=1e-10)


def test_semilog_tent_shape():
    p = PriceFluctParams(0.8, 0.5)
    x = np.linspace(0.1, 4, 50)
    slope_right = np.polyfit(x, np.log(laplace_density(x, p)), 1)[0]
    slope_left = np.polyfit(-x, np.log(laplace_density(-x, p)), 1)[0]
    assert slope_right == pytest.approx(-2 * 0.8 / 0.5, rel=1e-12)
    assert slope_left == pytest.approx(2 * 0.8 / 0.5, rel=1e-12)


def test_laplace_agrees_with_generic_fokker_planck():
    p = PriceFluctParams(1.0, 2.0)
    grid = np.linspace(-20, 20, 40_000)
    generic = stationary_density(p.model(), p.sde_amplitude, grid)
    np.testing.assert_allclose(generic, laplace_density(grid, p), rtol=1e-6)


def test_laplace_undefined_without_competition():
    with pytest.raises(NoStationaryDistributionError):
        laplace_density(0.0, NONCOMP)


def test_subbotin_values():
    p = SubbotinTailParams(scale=1.0, normalizer=1.0)
    assert subbotin_tail_density(1.0, p) == pytest.approx(math.exp(-1))
    assert subbotin_tail_density(-2.5, p) == subbotin_tail_density(2.5, p)
    diff = math.log(subbotin_tail_density(2.0, p)) - math.log(subbotin_tail_density(1.0, p))
    assert diff == pytest.approx(-1 - math.log(2), rel=1e-14)


def test_subbotin_singular_at_zero():
    with pytest.raises(SingularityError):
        subbotin_tail_density(0.0, SubbotinTailParams(1.0))


def test_params_validation():
    with pytest.raises(ValueError):
        PriceFluctParams(0.0, 1.0)
    with pytest.raises(ValueError):
        PriceFluctParams(1.0, 1.0, regime="monopoly")


@pytest.mark.slow
def test_competitive_mean_abs_converges():
    p = PriceFluctParams(0.5, 1.0)
    dt, every = 0.01, 20
    ens = price_ensemble(p, 1000, dt, 1000 + 999 * every, seed=3, burn_in=1000, record_every=every)
    assert ens.values.size == 10**6
    assert np.abs(ens.pooled()).mean() == pytest.approx(laplace_mean_abs(p), rel=0.03)


def test_non_competitive_broadens():
    ens = price_ensemble(NONCOMP, 500, 0.01, 2000, seed=4, record_every=10)
    w = windowed_mean_abs(ens.values[1:], 6)
    assert np.all(np.diff(w) > 0)
