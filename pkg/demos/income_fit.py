"""Sample incomes from the three-component mixture, histogram them, fit back."""

import numpy as np

from evoincome.estimation import build_histogram, fit_mixture
from evoincome.income import MixtureParams, mixture_sample

truth = MixtureParams.published()
incomes = mixture_sample(truth, 400_000, seed=1)
hist = build_histogram(incomes, bin_width=1000.0, range=(0.0, 3e5))

start = truth.replace(h0=2.2e4, t_wage=2.4e4, sigma_ue=1500.0)
result = fit_mixture(hist, start)

print(f"converged={result.converged} after {result.n_iterations} iterations")
print(f"{'param':>9} {'true':>10} {'fitted':>10} {'stderr':>10}")
for name in ("n_pf", "n_e", "n_ue", "h0", "sigma_f", "t_wage", "h_ue", "sigma_ue"):
    fitted = getattr(result.params, name)
    err = result.stderr.get(name, np.nan)
    print(f"{name:>9} {getattr(truth, name):10.4g} {fitted:10.4g} {err:10.2g}")
