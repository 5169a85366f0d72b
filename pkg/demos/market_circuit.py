"""Replicator competition, the money circuit and relaxation of the consumer density."""

import numpy as np

from evoincome.market import (
    CostCurve,
    Economy,
    Product,
    conservation_check,
    quasi_equilibrium_state,
    run_market,
    stability_probe,
)

costs = CostCurve(0.25, 0.2, 0.25)
products = [Product(1.0, 0.5, 0.02, 2.0, 1.0, costs),
            Product(1.2, 0.5, 0.02, 1.5, 0.8, costs),
            Product(0.9, 0.5, 0.02, 2.5, 1.2, costs)]
run = run_market(quasi_equilibrium_state(products), 0.01, 5000, economy=Economy())
alpha = run.series("alpha")
print(f"wage share alpha: start {alpha[0]:.6f}, end {alpha[-1]:.6f}")
report = conservation_check(run.ledgers, 0.01)
print(f"money conserved: {report.passed} (max relative violation "
      f"{report.max_relative_violation:.1e})")

fit_products = [Product(1.0, 0.5, 0.2, 2.0, 0.3, costs), Product(1.0, 0.5, 0.1, 2.0, 0.7, costs)]
run = run_market(quasi_equilibrium_state(fit_products), 0.05, 2000, keep_ledgers=False)
print("shares of the fitter and the weaker product at the end:", np.round(run.shares[-1], 4))

for eta, z in ((0.5, 2.0), (1.0, 5.0)):
    state = quasi_equilibrium_state([Product(1.0, eta, 0.02, z, 1.0, costs)])
    res = stability_probe(state, 0.05 * state.psi, 0.001, 5000)
    print(f"eta={eta}, z={z}: decay rate {res.rate:.4f}, expected {res.expected_rate:.4f}")
