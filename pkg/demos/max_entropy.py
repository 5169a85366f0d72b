"""Boltzmann-Gibbs occupation numbers from a maximum-entropy solve with fixed mean wage."""

import math

import numpy as np

from evoincome.estimation import max_entropy_wage

sol = max_entropy_wage([0.0, 1.0, 2.0], 0.5)
print("three bins, mean 0.5:", np.round(sol.occupation, 6),
      f"ratio {sol.occupation[1] / sol.occupation[0]:.12f}",
      f"closed form {(-1 + math.sqrt(13)) / 6:.12f}")

t = 19_000.0
for n in (10, 100, 1000, 10_000):
    width = 20 * t / n
    w = (np.arange(n) + 0.5) * width
    occ = max_entropy_wage(w, t).occupation
    rel = np.max(np.abs(occ / width / (np.exp(-w / t) / t) - 1))
    print(f"{n:>6} bins: max relative error vs exponential {rel:.2e}")
