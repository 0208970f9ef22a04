"""Run a small Monte-Carlo experiment through the harness and read its outputs.

Equivalent CLI: mg1inversion experiment --config demos/configs/cf_mse.json --out demos/out/cf_mse
"""

import json
from pathlib import Path

from mg1inversion import harness

here = Path(__file__).parent
spec = harness.ExperimentSpec.from_dict(json.loads((here / "configs" / "cf_mse.json").read_text()))
summary = harness.run_experiment(spec, here / "out" / "cf_mse")
for name, (slope, se) in summary["fitted_slopes"].items():
    print(f"{name:>12}: slope {slope:6.3f} +- {se:.3f}")
print((here / "out" / "cf_mse" / "report.csv").read_text())
