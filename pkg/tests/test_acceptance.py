"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (collected in the terminal summary)
and then asserts.  The Monte-Carlo criteria take a few minutes in total on a
single core; select them with ``pytest -m acceptance``.
"""

import math
import time

import numpy as np
import pytest

from mg1inversion import cdf_invert as ci
from mg1inversion import dist_catalog as dc
from mg1inversion import harness
from mg1inversion import joint_lambda as jl
from mg1inversion import mg1_sim as ms
from mg1inversion.harness import ExperimentSpec

pytestmark = pytest.mark.acceptance

EXP1 = dc.exponential(1.0)
EXP_CFG = {"model": EXP1.to_dict(), "lambda": 0.5, "xi": 1.0}


def _batch_se(indicator: np.ndarray, batches: int = 100) -> float:
    # probe observations are serially correlated; batch means give an honest SE
    usable = indicator[: indicator.size // batches * batches]
    means = usable.reshape(batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def test_criterion_1_simulator_oracles(report_criterion):
    n = 100_000
    t0 = time.perf_counter()
    sample = ms.simulate(EXP1, 0.5, 1.0, n, seed=1)
    elapsed = time.perf_counter() - t0
    v = sample.observations[1:]
    frac = float(np.mean(v == 0.0))
    se = _batch_se((v == 0.0).astype(float))
    gaps = [abs(np.mean(np.exp(1j * s * v)) - ms.gpk_cf(EXP1, 0.5, s)) for s in (0.5, 1, 2, 5)]
    ok = abs(frac - 0.5) <= 4 * se and max(gaps) <= 5 / math.sqrt(n) and elapsed < 5
    report_criterion(1, ok, f"zero fraction {frac:.4f} (|dev|/SE={abs(frac - 0.5) / se:.2f}), "
                            f"max GPK gap {max(gaps):.4f} <= {5 / math.sqrt(n):.4f}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_conditional_law(report_criterion):
    t0 = time.perf_counter()
    v = ms.simulate_transitions(EXP1, 0.5, 1.0, 1.0, 100_000, seed=2)
    z_scores = []
    for s in (1.0, 3.0):
        e = np.exp(1j * s * v)
        oracle = ms.conditional_cf_oracle(EXP1, 0.5, 1.0, 1.0, s)
        z_scores.append(abs(e.real.mean() - oracle.real) / (e.real.std(ddof=1) / math.sqrt(v.size)))
        z_scores.append(abs(e.imag.mean() - oracle.imag) / (e.imag.std(ddof=1) / math.sqrt(v.size)))
    trips = [abs(ms.lst_exponent(EXP1, 0.5, ms.psi_inverse(EXP1, 0.5, q)) - q) / q for q in (0.1, 0.75, 1.0, 10.0)]
    elapsed = time.perf_counter() - t0
    ok = max(z_scores) <= 4 and max(trips) <= 1e-10 and elapsed < 10
    report_criterion(2, ok, f"max |z| {max(z_scores):.2f} <= 4, psi round trip {max(trips):.1e} <= 1e-10, "
                            f"{elapsed:.2f}s")
    assert ok


def test_criterion_3_exact_round_trip(report_criterion):
    t0 = time.perf_counter()
    x = np.linspace(0, 5, 201)
    errs, deltas = {}, {}
    for name, model in (("Exponential(1)", EXP1), ("Gamma(2,1)", dc.gamma_mixture((2,), (1,), (1,))),
                        ("Example 1", dc.example1_mixture())):
        cf = lambda s, m=model: dc.cf(m, s)
        fine = ci.invert_on_grid(cf, x, 200.0, panels=2**16)
        coarse = ci.invert_on_grid(cf, x, 200.0, panels=2**15)
        errs[name] = fine.sup_error(dc.cdf(model, x))
        deltas[name] = float(np.max(np.abs(fine.values - coarse.values)))
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-2 and max(deltas.values()) <= 1e-4 and elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    report_criterion(3, ok, f"sup errors {detail}; panel-halving delta {max(deltas.values()):.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_cf_mse_scaling(report_criterion):
    by_n = ExperimentSpec.from_dict({**EXP_CFG, "kind": "cf_mse", "n_grid": [1000, 4000, 16000],
                                     "s_grid": [2.0], "replications": 200, "seed_base": 10_000})
    by_s = ExperimentSpec.from_dict({**EXP_CFG, "kind": "cf_mse", "n_grid": [10_000],
                                     "s_grid": [2.0, 4.0, 8.0, 16.0], "replications": 200, "seed_base": 20_000})
    slope_n, se_n = harness.mc_cf_mse(by_n).fitted_slopes["n@s=2"]
    slope_s, se_s = harness.mc_cf_mse(by_s).fitted_slopes["s@n=10000"]
    ok = -1.2 <= slope_n <= -0.8 and 1.6 <= slope_s <= 2.4
    report_criterion(4, ok, f"slope vs n at s=2 {slope_n:.3f} (+-{se_n:.3f}) in [-1.2,-0.8]; "
                            f"slope vs s at n=1e4 {slope_s:.3f} (+-{se_s:.3f}) in [1.6,2.4]")
    assert ok


def test_criterion_5_cdf_risk_rate(report_criterion):
    spec = ExperimentSpec.from_dict({**EXP_CFG, "kind": "cdf_risk", "n_grid": [1000, 4000, 16000],
                                     "x_grid": [0.5, 1.0, 2.0], "replications": 200, "seed_base": 30_000,
                                     "h_rule": {"rule": "theorem2", "eta": 1.0}})
    slopes = harness.mc_cdf_risk(spec).fitted_slopes
    values = {k: v[0] for k, v in slopes.items()}
    ok = all(-0.7 <= v <= -0.3 for v in values.values())
    detail = ", ".join(f"{k} {v:.3f}" for k, v in values.items())
    report_criterion(5, ok, f"CDF MSE slopes vs n: {detail}; required in [-0.7,-0.3]")
    assert ok


FIGURES = {
    "Example 1": dict(model=dc.example1_mixture().to_dict(), lam=1.0, x_range=[0, 10, 201], h_list=[0.5, 1, 2, 5]),
    "Example 2": dict(model=dc.lognormal(0.2, 0.5).to_dict(), lam=0.6, x_range=[0, 5, 201], h_list=[2, 4, 6, 8]),
    "Example 3": dict(model=dc.truncated_normal(0.5, 0.1).to_dict(), lam=0.6, x_range=[0, 1.5, 151],
                      h_list=[1, 2, 4, 6]),
}


def _figure(name: str, seed_base: int):
    cfg = FIGURES[name]
    spec = ExperimentSpec.from_dict({
        "model": cfg["model"], "lambda": cfg["lam"], "xi": 1.0, "kind": "figure", "n_grid": [10_000],
        "replications": 20, "seed_base": seed_base, "x_range": cfg["x_range"], "h_list": cfg["h_list"],
    })
    return harness.reproduce_figure(spec)


def test_criterion_6_figures(report_criterion):
    ex1 = _figure("Example 1", 40_000)
    med = ex1.median_sup_error
    ok1 = med[5.0] < med[0.5]
    ex2 = _figure("Example 2", 41_000)
    share2 = ex2.best_h_share([4.0])
    ok2 = share2 >= 0.5
    ex3 = _figure("Example 3", 42_000)
    share3 = ex3.best_h_share([1.0, 2.0])
    ok3 = share3 >= 0.5
    med3 = ", ".join(f"h={h:g}: {v:.3f}" for h, v in ex3.median_sup_error.items())
    report_criterion(6, ok1 and ok2 and ok3,
                     f"Example 1 median sup error h=5 {med[5.0]:.3f} vs h=0.5 {med[0.5]:.3f} "
                     f"[{'ok' if ok1 else 'fail'}]; Example 2 best h=4 share {share2:.2f} "
                     f"[{'ok' if ok2 else 'fail'}]; Example 3 best h in {{1,2}} share {share3:.2f} "
                     f"(medians {med3}) [{'ok' if ok3 else 'fail'}]")
    assert ok1 and ok2 and ok3


def test_criterion_7_martingale(report_criterion):
    spec = ExperimentSpec.from_dict({**EXP_CFG, "kind": "martingale", "n_grid": [10_000],
                                     "s_grid": [1.0, 5.0], "replications": 200, "seed_base": 50_000})
    rep = harness.martingale_diagnostic(spec, spec.s_grid)
    z = np.maximum(np.abs(rep.mean.real) / rep.se_re, np.abs(rep.mean.imag) / rep.se_im)
    ok = rep.max_identity_residual <= 1e-10 and bool(rep.within(4.0).all())
    report_criterion(7, ok, f"identity residual {rep.max_identity_residual:.1e} <= 1e-10; "
                            f"|mean|/SE at s=1,5: {z[0]:.2f}, {z[1]:.2f} <= 4")
    assert ok


def _joint_errors(model, lam, xi, h, k, seed_base, reps=20):
    errs = []
    for r in range(reps):
        sample = ms.simulate(model, lam, xi, 40_000, seed=seed_base + r)
        res = jl.estimate_joint(sample, h, k=k)
        errs.append(abs(res.lambda_hat - lam) / lam)
    return float(np.median(errs))


def test_criterion_8_joint_lambda(report_criterion):
    exp_err = _joint_errors(EXP1, 0.5, 1.0, ci.choose_truncation(40_000, 1.0), 12.0, 60_000)
    loaded = dc.gamma_mixture((1.5, 5), (0.8, 10), (0.4, 0.6))
    loaded_err = _joint_errors(loaded, 0.9, 0.5, 8.0, 12.0, 61_000)
    ok_exp, ok_loaded = exp_err <= 0.1, loaded_err <= 0.15
    report_criterion(8, ok_exp and ok_loaded,
                     f"Exponential median rel. error {exp_err:.3f} <= 0.1 [{'ok' if ok_exp else 'fail'}]; "
                     f"loaded two-component mixture (lambda=0.9) {loaded_err:.3f} <= 0.15 [{'ok' if ok_loaded else 'fail'}]")
    assert ok_exp and ok_loaded


def test_criterion_9_determinism(report_criterion, tmp_path):
    configs = {
        "cf_mse": {**EXP_CFG, "kind": "cf_mse", "n_grid": [1000, 4000], "s_grid": [1.0, 2.0, 4.0]},
        "cdf_risk": {**EXP_CFG, "kind": "cdf_risk", "n_grid": [1000, 4000], "x_grid": [0.5, 1.0]},
        "figure": {**EXP_CFG, "kind": "figure", "n_grid": [2000], "x_range": [0, 3, 31], "h_list": [2, 5]},
        "martingale": {**EXP_CFG, "kind": "martingale", "n_grid": [2000], "s_grid": [1.0, 5.0]},
    }
    mismatched = []
    for kind, cfg in configs.items():
        outputs = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
            spec = ExperimentSpec.from_dict({**cfg, "replications": 6, "seed_base": 7, "workers": workers})
            out = tmp_path / kind / tag
            harness.run_experiment(spec, out)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        if not (outputs[0] == outputs[1] == outputs[2]) or not outputs[0]:
            mismatched.append(kind)
    ok = not mismatched
    report_criterion(9, ok, "CSV outputs byte-identical across reruns and 1 vs 2 workers for "
                            f"{', '.join(configs)}" + (f"; mismatched: {mismatched}" if mismatched else ""))
    assert ok
