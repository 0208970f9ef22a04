"""Simulate a probed M/G/1 workload and check it against stationary formulas.

Run: python3 demos/01_simulate_workload.py
"""

import numpy as np

from mg1inversion import dist_catalog as dc
from mg1inversion import mg1_sim as ms

model = dc.example1_mixture()
lam, xi = 1.0, 1.0
print("mean job size", dc.mean(model), "load", ms.traffic_intensity(model, lam))

sample = ms.simulate(model, lam, xi, n=50_000, seed=1)
print("kept", sample.observations.size, "observations after", sample.burn_in_discarded, "burn-in probes")

# the empty-system probability is 1 - rho, and empty probes are exact zeros
print("zero fraction", ms.empirical_zero_fraction(sample), "vs", 1 - sample.rho)

# workload CF against its closed form; at load 0.92 the probes are strongly
# correlated, so expect agreement only to about 0.02 at this n
v = sample.observations[1:]
for s in (0.5, 1.0, 2.0):
    print(f"s={s}: empirical {np.mean(np.exp(1j * s * v)):.4f}  exact {ms.gpk_cf(model, lam, s):.4f}")

# one probe gap from a fixed level, against the conditional law
draws = ms.simulate_transitions(model, lam, xi, v_prev=1.0, size=50_000, seed=2)
print("P(V=0 | V_prev=1):", np.mean(draws == 0), "vs", ms.conditional_atom_oracle(model, lam, xi, 1.0))
