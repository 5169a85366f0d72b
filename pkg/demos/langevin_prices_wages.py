"""Stationary laws of the wage and price Langevin equations versus their closed forms."""

import numpy as np
from scipy import stats

from evoincome.estimation import EmpiricalDistribution, ks_statistic
from evoincome.income import WageProcessParams, wage_ensemble
from evoincome.prices import PriceFluctParams, laplace_cdf, price_ensemble, windowed_mean_abs

wages = WageProcessParams(zeta=2.0, q_amplitude=1.0)
w = wage_ensemble(wages, 1000, 0.001, 5000 + 200 * 20, seed=1, burn_in=5000,
                  record_every=20).pooled()
ks = ks_statistic(EmpiricalDistribution(sample=w), stats.expon(scale=0.5).cdf)
print(f"wages: mean {w.mean():.4f} (expected {wages.stationary_mean}), KS {ks:.4f}")

prices = PriceFluctParams(relaxation=1.0, amplitude=2.0)
dp = price_ensemble(prices, 1000, 0.01, 1000 + 200 * 20, seed=2, burn_in=1000,
                    record_every=20).pooled()
ks = ks_statistic(EmpiricalDistribution(sample=dp), lambda v: laplace_cdf(v, prices))
print(f"prices: mean |dp| {np.abs(dp).mean():.4f}, KS vs Laplace {ks:.4f}")

rising = PriceFluctParams(1.0, 2.0, regime="non_competitive")
ens = price_ensemble(rising, 1000, 0.01, 3000, seed=3, record_every=10)
print("non-competitive windowed E|dp|:", np.round(windowed_mean_abs(ens.values[1:], 6), 3))
