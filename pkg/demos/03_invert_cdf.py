"""Turn the CF estimate into a CDF estimate and compare truncation levels.

Writes CSV curves to demos/out/invert/.  Run: python3 demos/03_invert_cdf.py
"""

from pathlib import Path

import numpy as np

from mg1inversion import cdf_invert as ci
from mg1inversion import dist_catalog as dc
from mg1inversion import mg1_sim as ms

out = Path(__file__).parent / "out" / "invert"
model = dc.example1_mixture()
x = np.linspace(0, 10, 201)
truth = dc.cdf(model, x)

# noise-free inversion of the exact CF: only truncation and quadrature error
exact = ci.invert_on_grid(lambda s: dc.cf(model, s), x, h=200.0, panels=2**16)
print("exact CF, h=200: sup error", exact.sup_error(truth))

sample = ms.simulate(model, 1.0, 1.0, 10_000, seed=4)
h_rule = ci.choose_truncation(sample.n, dc.smoothness_eta(model))
print("rule-based truncation h =", h_rule)
for h in (0.5, 1.0, 2.0, 5.0, h_rule):
    est, _ = ci.estimate_cdf(sample, 1.0, x, h)
    est.to_csv(out / f"G_hat_h{h:g}.csv")
    print(f"h={h:5.2f}: sup error {est.sup_error(truth):.3f}")
