"""Quadrature stationary densities checked against closed forms."""

import numpy as np

from evoincome.sde import DriftDiffusion, stationary_density

x = np.linspace(-8, 8, 4001)
ou = stationary_density(DriftDiffusion(lambda v: -v, lambda v: np.ones_like(v)), 1.0, x)
exact = np.exp(-x**2 / 2) / np.sqrt(2 * np.pi)
print(f"OU: max abs error vs N(0, 1) {np.max(np.abs(ou - exact)):.2e}")

laplace = stationary_density(DriftDiffusion(lambda v: -np.sign(v), lambda v: np.ones_like(v)),
                             1.0, x)
print(f"sign drift: max abs error vs e^-|x|/2 {np.max(np.abs(laplace - np.exp(-abs(x)) / 2)):.2e}")

# multiplicative noise: a restoring drift F = -a x with G = x gives x^-(1 + a/A)
a, amp = 0.5, 0.5
grid = np.geomspace(1.0, 1e3, 20001)
for sign in (-1.0, 1.0):
    p = stationary_density(DriftDiffusion(lambda v: sign * a * v, lambda v: v), amp, grid)
    slope = np.polyfit(np.log(grid), np.log(p), 1)[0]
    print(f"F = {sign * a:+} x, G = x: log-log slope {slope:+.6f}")
