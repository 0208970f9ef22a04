"""Estimate the job-size characteristic function from workload probes.

Run: python3 demos/02_estimate_cf.py
"""

import numpy as np

from mg1inversion import cf_estim as ce
from mg1inversion import dist_catalog as dc
from mg1inversion import mg1_sim as ms

model = dc.exponential(1.0)
lam = 0.5
grid = np.linspace(0, 8, 9)

for n in (1_000, 10_000, 100_000):
    sample = ms.simulate(model, lam, 1.0, n, seed=n)
    eps = ce.choose_epsilon(sample)
    est = ce.cf_on_grid(sample, lam, eps, grid)
    err = np.abs(est.values - dc.cf(model, grid))
    print(f"n={n:>6}  eps={eps}  max error on [0,8]: {err.max():.4f}  (largest at s={grid[err.argmax()]:g})")

# the error grows with s: variance is roughly proportional to s^2 / n
sample = ms.simulate(model, lam, 1.0, 10_000, seed=3)
for s in (1.0, 4.0, 16.0):
    g, truncated = ce.estimate_gamma_eps(sample, lam, s)
    print(f"s={s:>4}: estimate {g:.3f}  truth {dc.cf(model, s):.3f}  truncated={truncated}")
