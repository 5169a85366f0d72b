import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from evoincome.errors import (
    InfeasibleError,
    InsufficientTailError,
    InvalidCDFError,
    InvalidParamsError,
)
from evoincome.estimation import (
    EmpiricalDistribution,
    bin_average_density,
    build_histogram,
    fit_mixture,
    hill_tail_exponent,
    ks_statistic,
    max_entropy_wage,
)
from evoincome.income import MixtureParams, labour_density, mixture_cdf, mixture_sample

FIG1 = MixtureParams.published()


def analytic_histogram(params, hi=4e5, n=800):
    edges = np.linspace(0.0, hi, n + 1)
    dens = np.diff(mixture_cdf(edges, params)) / np.diff(edges)
    return EmpiricalDistribution(edges=edges, density=dens / np.sum(dens * np.diff(edges)))


# histograms

def test_constant_sample_single_bin():
    h = build_histogram(np.full(100, 3.0), n_bins=10)
    occupied = h.density > 0
    assert occupied.sum() == 1
    assert h.density[occupied][0] == pytest.approx(1 / h.widths[0])
    hw = build_histogram(np.full(7, 3.0), bin_width=0.5)
    assert hw.density.tolist() == [2.0]


def test_uniform_histogram_flat():
    rng = np.random.default_rng(0)
    h = build_histogram(rng.random(10**6), n_bins=10, range=(0, 1))
    np.testing.assert_allclose(h.density, 1.0, atol=0.02)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.integers(1, 40))
@settings(max_examples=100, deadline=None)
def test_histogram_normalized(xs, bins):
    h = build_histogram(xs, n_bins=bins)
    assert np.sum(h.density * h.widths) == pytest.approx(1.0, abs=1e-12)


def test_histogram_input_errors():
    with pytest.raises(ValueError):
        build_histogram([])
    with pytest.raises(ValueError):
        build_histogram([1.0, np.nan])


def test_histogram_contiguity_and_mass_checks():
    with pytest.raises(ValueError):
        EmpiricalDistribution.from_bins([0, 2], [1, 3], [0.5, 0.5])
    with pytest.raises(ValueError):
        EmpiricalDistribution(edges=[0, 1, 2], density=[0.5, 0.6])
    d = EmpiricalDistribution.from_bins([0, 1], [1, 2], [0.25, 0.75])
    assert d.edges.tolist() == [0, 1, 2]


# KS

def test_ks_matches_scipy():
    x = np.random.default_rng(1).normal(size=5000)
    ours = ks_statistic(EmpiricalDistribution(sample=x), stats.norm.cdf)
    assert ours == pytest.approx(stats.kstest(x, "norm").statistic, rel=1e-12)


@pytest.mark.slow
def test_ks_small_for_true_model():
    x = np.random.default_rng(2).random(10**6)
    assert ks_statistic(EmpiricalDistribution(sample=x), lambda v: np.clip(v, 0, 1)) < 0.002


def test_ks_mass_point_bound():
    d = EmpiricalDistribution(sample=np.zeros(50))
    assert ks_statistic(d, stats.norm.cdf) >= 0.5


def test_ks_invariant_under_monotone_relabeling():
    x = np.random.default_rng(3).exponential(size=2000)
    a = ks_statistic(EmpiricalDistribution(sample=x), stats.expon.cdf)
    b = ks_statistic(EmpiricalDistribution(sample=np.log(x)), lambda y: stats.expon.cdf(np.exp(y)))
    assert a == pytest.approx(b, abs=1e-12)


def test_ks_rejects_bad_cdf():
    d = EmpiricalDistribution(sample=[0.1, 0.2, 0.3])
    with pytest.raises(InvalidCDFError):
        ks_statistic(d, lambda v: 2.0 * v + 0.5)
    with pytest.raises(InvalidCDFError):
        ks_statistic(d, lambda v: 1.0 - v)


def test_ks_histogram_against_its_own_cdf():
    d = analytic_histogram(FIG1)
    assert ks_statistic(d, lambda h: mixture_cdf(h, FIG1)) < 1e-6


# Hill

def pareto_draws(lam, n, seed):
    u = np.random.default_rng(seed).random(n)
    return (1.0 - u) ** (-1.0 / (lam - 1.0))


def test_hill_on_exact_pareto():
    est = hill_tail_exponent(pareto_draws(2.0, 100_000, 4), 1000)
    assert est.exponent == pytest.approx(2.0, abs=0.1)
    assert est.stderr == pytest.approx((est.exponent - 1) / math.sqrt(1000))
    assert est.stable


def test_hill_scale_invariant():
    x = pareto_draws(2.5, 20_000, 5)
    a = hill_tail_exponent(x, 500).exponent
    assert hill_tail_exponent(37.5 * x, 500).exponent == pytest.approx(a, rel=1e-12)


def test_hill_flags_exponential_tail():
    x = np.random.default_rng(6).exponential(size=100_000)
    est = hill_tail_exponent(x, 2000)
    vals = [est.by_k[k] for k in sorted(est.by_k)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert not est.stable


def test_hill_bias_shrinks_with_scale():
    # Pareto with a lognormal-like perturbation at small x: the bias fades as k/n -> 0
    def sample(n, seed):
        x = pareto_draws(2.0, n, seed)
        return x + 1.0
    err_small = abs(hill_tail_exponent(sample(10_000, 7), 1000).exponent - 2.0)
    err_large = abs(hill_tail_exponent(sample(1_000_000, 8), 1000).exponent - 2.0)
    assert err_large < err_small


def test_hill_needs_tail_points():
    x = pareto_draws(2.0, 100, 9)
    with pytest.raises(InsufficientTailError):
        hill_tail_exponent(x, 5)
    with pytest.raises(InsufficientTailError):
        hill_tail_exponent(x, 50)


# max entropy

def test_entropy_uniform_when_mean_centred():
    sol = max_entropy_wage([0, 1, 2], 1.0)
    np.testing.assert_allclose(sol.occupation, 1 / 3, atol=1e-12)
    assert sol.multiplier == pytest.approx(0.0, abs=1e-12)


def test_entropy_quadratic_root():
    sol = max_entropy_wage([0, 1, 2], 0.5)
    x = (-1 + math.sqrt(13)) / 6
    p = sol.occupation
    assert p[1] / p[0] == pytest.approx(x, abs=1e-9)
    assert p[2] / p[1] == pytest.approx(x, abs=1e-9)
    assert abs(np.dot(p, [0, 1, 2]) - 0.5) < 1e-10
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_entropy_fine_grid_is_exponential():
    t = 19000.0
    n = 10_000
    width = 20 * t / n
    w = (np.arange(n) + 0.5) * width
    sol = max_entropy_wage(w, t)
    rel = sol.occupation / width / labour_density(w, FIG1.replace(t_wage=t)) - 1
    assert np.max(np.abs(rel)) < 0.01


def test_entropy_is_maximal():
    w = np.array([0.0, 1.0, 2.0, 3.5, 5.0])
    mean = 1.7
    sol = max_entropy_wage(w, mean)
    rng = np.random.default_rng(10)
    checked = 0
    while checked < 100:
        q = rng.dirichlet(np.ones(w.size))
        # move along the constraint-preserving directions onto the feasible plane
        a = np.vstack([np.ones_like(w), w])
        q = q - a.T @ np.linalg.solve(a @ a.T, a @ q - [1.0, mean])
        if np.any(q < 0):
            continue
        checked += 1
        ent = -np.sum(q[q > 0] * np.log(q[q > 0]))
        assert sol.entropy >= ent - 1e-12


def test_entropy_infeasible():
    with pytest.raises(InfeasibleError):
        max_entropy_wage([0, 1, 2], 2.5)


def test_entropy_at_range_end_is_degenerate():
    sol = max_entropy_wage([0, 1, 2], 0.0)
    assert sol.occupation.tolist() == [1.0, 0.0, 0.0]


# fitting

def perturbed(params, signs, frac=0.3):
    names = ("n_pf", "n_e", "n_ue", "h0", "sigma_f", "t_wage", "h_ue", "sigma_ue")
    ch = {n: getattr(params, n) * (1 + frac * s) for n, s in zip(names, signs)}
    tot = ch["n_pf"] + ch["n_e"] + ch["n_ue"]
    for k in ("n_pf", "n_e", "n_ue"):
        ch[k] /= tot
    return params.replace(**ch)


def test_fit_recovers_published_parameters():
    dist = analytic_histogram(FIG1)
    init = perturbed(FIG1, [1, -1, 1, -1, 1, 1, -1, -1])
    res = fit_mixture(dist, init)
    assert res.converged
    for name in ("n_pf", "n_e", "n_ue", "h0", "sigma_f", "t_wage", "h_ue", "sigma_ue"):
        assert getattr(res.params, name) == pytest.approx(getattr(FIG1, name), rel=0.1)
    assert res.params.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert all(b <= a for a, b in zip(res.cost_history, res.cost_history[1:]))


def test_fit_pure_exponential_sample():
    truth = FIG1.replace(n_pf=0.0, n_e=1.0, n_ue=0.0)
    s = mixture_sample(truth, 200_000, seed=12)
    dist = build_histogram(s, n_bins=200)
    res = fit_mixture(dist, truth.replace(t_wage=13000.0))
    assert res.converged
    assert res.params.t_wage == pytest.approx(19000.0, rel=0.02)
    assert set(res.stderr) == {"t_wage"}
    assert 0 < res.stderr["t_wage"] < 0.02 * 19000


def test_fit_all_frozen_is_noop():
    dist = analytic_histogram(FIG1)
    res = fit_mixture(dist, FIG1, frozen=set(FIG1.to_dict()) - {"pareto_enabled"})
    assert res.n_iterations == 0
    assert res.converged
    assert res.params == FIG1
    assert res.objective_value >= 0


def test_fit_respects_frozen_values():
    dist = analytic_histogram(FIG1)
    init = perturbed(FIG1, [1, -1, 1, -1, 1, 1, -1, -1]).replace(n_ue=0.12, h_ue=7400.0,
                                                                 sigma_ue=1500.0)
    init = init.replace(n_e=1 - 0.12 - init.n_pf)
    res = fit_mixture(dist, init, frozen={"n_ue", "sigma_ue"})
    assert res.params.n_ue == 0.12
    assert res.params.sigma_ue == 1500.0


def test_fit_rejects_unknown_and_infeasible():
    dist = analytic_histogram(FIG1)
    with pytest.raises(InvalidParamsError):
        fit_mixture(dist, FIG1, frozen={"mu"})
    with pytest.raises(InfeasibleError):
        fit_mixture(dist, FIG1.replace(n_pf=0.5))


def test_fit_reports_non_convergence():
    dist = analytic_histogram(FIG1)
    res = fit_mixture(dist, perturbed(FIG1, [1] * 8), max_iter=2)
    assert not res.converged
    assert res.n_iterations == 2


def test_bin_average_density_integrates_cdf():
    edges = np.array([0.0, 5e3, 1e4, 5e4])
    avg = bin_average_density(edges, FIG1)
    np.testing.assert_allclose(avg * np.diff(edges), np.diff(mixture_cdf(edges, FIG1)), rtol=1e-14)
