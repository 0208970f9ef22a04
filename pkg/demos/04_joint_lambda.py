"""Estimate the arrival rate and the CDF together when lambda is unknown.

Run: python3 demos/04_joint_lambda.py
"""

from mg1inversion import cdf_invert as ci
from mg1inversion import dist_catalog as dc
from mg1inversion import joint_lambda as jl
from mg1inversion import mg1_sim as ms

model = dc.exponential(1.0)
sample = ms.simulate(model, 0.5, 1.0, 40_000, seed=5)
h = ci.choose_truncation(sample.n, 1.0)

fast = jl.estimate_joint(sample, h, k=12.0)
print("accelerated:", fast.summary())

# the plain damped iteration reaches the same root, only much later
slow = jl.estimate_joint(sample, h, k=12.0, method="fixed_point", max_iter=2000)
print("plain damped:", slow.summary())
print("true lambda 0.5; first iterates", [round(v, 4) for v in slow.trace[:5]])
