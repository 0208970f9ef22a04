"""Monte-Carlo experiments: CF and CDF risk scaling, figure curves, martingale checks.

Replication ``r`` of every experiment simulates with seed ``seed_base + r``;
results are gathered by replication index, so the output does not depend on
the number of worker processes.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from . import cdf_invert as ci
from . import cf_estim as ce
from . import dist_catalog as dc
from . import mg1_sim as ms
from .dist_catalog import JobSizeModel
from .errors import ConfigError

__all__ = [
    "ExperimentSpec",
    "RiskReport",
    "FigureReport",
    "MartingaleReport",
    "fit_loglog",
    "mc_cf_mse",
    "mc_cdf_risk",
    "reproduce_figure",
    "martingale_diagnostic",
    "run_experiment",
    "write_manifest",
    "spec_from_manifest",
]

EXPERIMENT_KINDS = ("cf_mse", "cdf_risk", "figure", "martingale")


@dataclass(frozen=True)
class ExperimentSpec:
    """Configuration of one Monte-Carlo experiment.

    ``h_rule`` is ``{"rule": "theorem2", "eta": ...}`` (``eta`` defaults to the
    model's) or ``{"rule": "fixed", "h": ...}``; ``epsilon_rule`` is
    ``"auto"`` or a number in ``(0, 1)``.
    """

    model: JobSizeModel
    lam: float
    xi: float
    n_grid: tuple[int, ...]
    replications: int
    seed_base: int = 0
    kind: str = "cf_mse"
    s_grid: tuple[float, ...] = ()
    x_grid: tuple[float, ...] = ()
    h_rule: dict = field(default_factory=lambda: {"rule": "theorem2"})
    epsilon_rule: Any = "auto"
    h_list: tuple[float, ...] = ()
    burn_in: Optional[int] = None
    panels: Optional[int] = None
    slope_min_s: float = 2.0
    workers: int = 1

    def __post_init__(self) -> None:
        n_grid = tuple(int(v) for v in self.n_grid)
        object.__setattr__(self, "n_grid", n_grid)
        for name in ("s_grid", "x_grid", "h_list"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.replications < 2:
            raise ConfigError("replications must be at least 2")
        if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ConfigError("n_grid must be nonempty and strictly increasing")
        if min(n_grid) < 2:
            raise ConfigError("every n must be at least 2")
        if not (self.lam > 0 and self.xi > 0):
            raise ConfigError("lambda and xi must be positive")
        rule = dict(self.h_rule)
        if rule.get("rule") == "theorem2":
            rule["eta"] = float(rule.get("eta") or self.model.eta)
        elif rule.get("rule") == "fixed":
            if not float(rule.get("h", 0)) > 0:
                raise ConfigError("fixed h_rule needs a positive h")
            rule["h"] = float(rule["h"])
        else:
            raise ConfigError(f"unknown h_rule {self.h_rule!r}")
        object.__setattr__(self, "h_rule", rule)
        if self.epsilon_rule != "auto":
            eps = float(self.epsilon_rule)
            if not 0 < eps < 1:
                raise ConfigError("epsilon must lie in (0, 1)")
            object.__setattr__(self, "epsilon_rule", eps)
        if self.kind == "cf_mse" and not self.s_grid:
            raise ConfigError("cf_mse needs an s_grid")
        if self.kind in ("cdf_risk", "figure") and not self.x_grid:
            raise ConfigError(f"{self.kind} needs an x_grid")
        if self.kind == "figure" and not self.h_list:
            raise ConfigError("figure needs an h_list")
        if any(x < 0 for x in self.x_grid) or any(b < a for a, b in zip(self.x_grid, self.x_grid[1:])):
            raise ConfigError("x_grid must be nonnegative and increasing")

    def truncation(self, n: int) -> float:
        if self.h_rule["rule"] == "fixed":
            return self.h_rule["h"]
        return ci.choose_truncation(n, self.h_rule["eta"])

    def epsilon(self, sample: ms.WorkloadSample) -> float:
        return ce.choose_epsilon(sample) if self.epsilon_rule == "auto" else float(self.epsilon_rule)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        d["lambda"] = d.pop("lam")
        d.pop("workers")
        for key in ("n_grid", "s_grid", "x_grid", "h_list"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        try:
            model = JobSizeModel.from_dict(d.pop("model"))
            lam = d.pop("lambda", d.pop("lam", None))
            if "x_range" in d:
                lo, hi, num = d.pop("x_range")
                d["x_grid"] = np.linspace(float(lo), float(hi), int(num)).tolist()
            known = {f for f in cls.__dataclass_fields__} - {"model", "lam"}
            unknown = set(d) - known
            if unknown:
                raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
            return cls(model=model, lam=float(lam), **d)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RiskReport:
    """MSE cells ``(param, n, mse, se, reps)`` with fitted log-log slopes."""

    param_name: str
    cells: list
    fitted_slopes: dict
    runtime_seconds: float = 0.0

    def mse(self, param: float, n: int) -> float:
        for p, nn, m, _, _ in self.cells:
            if p == param and nn == n:
                return m
        raise KeyError((param, n))

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"{self.param_name},n,mse,se,reps\n")
            for p, n, m, se, reps in self.cells:
                fh.write(f"{p!r},{n},{m!r},{se!r},{reps}\n")
        return path

    def slopes_to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            fh.write("name,slope,stderr\n")
            for name, (slope, se) in self.fitted_slopes.items():
                fh.write(f"{name},{slope!r},{se!r}\n")
        return path


@dataclass
class FigureReport:
    h_list: tuple
    sup_errors: np.ndarray  # (replications, len(h_list))
    x_grid: np.ndarray
    g_true: np.ndarray
    curves: dict  # h -> Ĝ on x_grid for replication 0
    runtime_seconds: float = 0.0

    @property
    def median_sup_error(self) -> dict:
        return {h: float(np.median(self.sup_errors[:, k])) for k, h in enumerate(self.h_list)}

    @property
    def best_h(self) -> np.ndarray:
        return np.asarray(self.h_list)[np.argmin(self.sup_errors, axis=1)]

    def best_h_share(self, allowed: Sequence[float]) -> float:
        return float(np.mean(np.isin(self.best_h, list(allowed))))

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        p = out / "G_true.csv"
        with open(p, "w", newline="") as fh:
            fh.write("x,G_true\n")
            for x, g in zip(self.x_grid.tolist(), self.g_true.tolist()):
                fh.write(f"{x!r},{g!r}\n")
        paths.append(p)
        for h in self.h_list:
            p = out / f"G_hat_h{h:g}.csv"
            with open(p, "w", newline="") as fh:
                fh.write("x,G_hat\n")
                for x, g in zip(self.x_grid.tolist(), self.curves[h].tolist()):
                    fh.write(f"{x!r},{g!r}\n")
            paths.append(p)
        p = out / "sup_errors.csv"
        with open(p, "w", newline="") as fh:
            fh.write("rep,h,sup_error\n")
            for r, row in enumerate(self.sup_errors.tolist()):
                for h, e in zip(self.h_list, row):
                    fh.write(f"{r},{h!r},{e!r}\n")
        paths.append(p)
        return paths


@dataclass
class MartingaleReport:
    s_list: tuple
    mean: np.ndarray  # complex MC mean of (1/n) sum Z_j(s), per s
    se_re: np.ndarray
    se_im: np.ndarray
    max_identity_residual: float
    replications: int

    def within(self, k_se: float = 4.0) -> np.ndarray:
        ok_re = np.abs(self.mean.real) <= k_se * self.se_re
        ok_im = np.abs(self.mean.imag) <= k_se * self.se_im
        return ok_re & ok_im

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("s,mean_re,mean_im,se_re,se_im,reps\n")
            for s, m, a, b in zip(self.s_list, self.mean.tolist(), self.se_re.tolist(), self.se_im.tolist()):
                fh.write(f"{s!r},{m.real!r},{m.imag!r},{a!r},{b!r},{self.replications}\n")
        return path


def fit_loglog(x, y) -> tuple[float, float]:
    """OLS slope of ``log y`` on ``log x`` with its standard error."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    if x.size == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), 0.0
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def _map_reps(func: Callable, spec: ExperimentSpec, extra: tuple = ()) -> list:
    args = [(spec, r) + extra for r in range(spec.replications)]
    if spec.workers <= 1:
        return [func(*a) for a in args]
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        futures = [pool.submit(func, *a) for a in args]
        return [f.result() for f in futures]


def _simulate(spec: ExperimentSpec, n: int, r: int) -> ms.WorkloadSample:
    return ms.simulate(spec.model, spec.lam, spec.xi, n, burn_in=spec.burn_in, seed=spec.seed_base + r)


def _cells(param_name, params, n_grid, sq_err: np.ndarray) -> list:
    # sq_err: (reps, len(n_grid), len(params))
    reps = sq_err.shape[0]
    mse = sq_err.mean(axis=0)
    se = sq_err.std(axis=0, ddof=1) / math.sqrt(reps)
    cells = []
    for i, n in enumerate(n_grid):
        for k, p in enumerate(params):
            cells.append((float(p), int(n), float(mse[i, k]), float(se[i, k]), reps))
    return cells, mse


def _cf_rep(spec: ExperimentSpec, r: int) -> np.ndarray:
    s = np.asarray(spec.s_grid)
    truth = dc.cf(spec.model, s)
    out = np.empty((len(spec.n_grid), s.size))
    for i, n in enumerate(spec.n_grid):
        sample = _simulate(spec, n, r)
        est, _ = ce.estimate_gamma_eps(sample, spec.lam, s, spec.epsilon(sample))
        out[i] = np.abs(est - truth) ** 2
    return out


def mc_cf_mse(spec: ExperimentSpec) -> RiskReport:
    """Monte-Carlo MSE of the CF estimator on ``s_grid x n_grid``.

    Slopes: ``n@s=<s>`` (log-MSE vs log-n at fixed s) and ``s@n=<n>``
    (log-MSE vs log-s at fixed n over ``s >= slope_min_s``).
    """
    t0 = time.perf_counter()
    sq = np.stack(_map_reps(_cf_rep, spec))
    cells, mse = _cells("s", spec.s_grid, spec.n_grid, sq)
    slopes = {}
    if len(spec.n_grid) >= 2:
        for k, s in enumerate(spec.s_grid):
            slopes[f"n@s={s:g}"] = fit_loglog(spec.n_grid, mse[:, k])
    big = [k for k, s in enumerate(spec.s_grid) if s >= spec.slope_min_s]
    if len(big) >= 2:
        for i, n in enumerate(spec.n_grid):
            slopes[f"s@n={n}"] = fit_loglog(np.asarray(spec.s_grid)[big], mse[i, big])
    return RiskReport("s", cells, slopes, time.perf_counter() - t0)


def _cdf_rep(spec: ExperimentSpec, r: int) -> np.ndarray:
    x = np.asarray(spec.x_grid)
    truth = dc.cdf(spec.model, x)
    out = np.empty((len(spec.n_grid), x.size))
    for i, n in enumerate(spec.n_grid):
        sample = _simulate(spec, n, r)
        est, _ = ci.estimate_cdf(sample, spec.lam, x, spec.truncation(n),
                                 epsilon=spec.epsilon(sample), panels=spec.panels)
        out[i] = (est.values - truth) ** 2
    return out


def mc_cdf_risk(spec: ExperimentSpec) -> RiskReport:
    """Monte-Carlo MSE of the inverted CDF at ``x_grid`` for every ``n``.

    The truncation for each ``n`` follows ``spec.h_rule``.  Slopes are
    ``n@x=<x>``.
    """
    t0 = time.perf_counter()
    sq = np.stack(_map_reps(_cdf_rep, spec))
    cells, mse = _cells("x", spec.x_grid, spec.n_grid, sq)
    slopes = {}
    if len(spec.n_grid) >= 2:
        for k, x in enumerate(spec.x_grid):
            slopes[f"n@x={x:g}"] = fit_loglog(spec.n_grid, mse[:, k])
    return RiskReport("x", cells, slopes, time.perf_counter() - t0)


def _figure_rep(spec: ExperimentSpec, r: int, h_list: tuple) -> tuple[np.ndarray, dict]:
    x = np.asarray(spec.x_grid)
    truth = dc.cdf(spec.model, x)
    sample = _simulate(spec, spec.n_grid[-1], r)
    eps = spec.epsilon(sample)
    errs = np.empty(len(h_list))
    curves = {}
    for k, h in enumerate(h_list):
        est, _ = ci.estimate_cdf(sample, spec.lam, x, h, epsilon=eps, panels=spec.panels)
        errs[k] = est.sup_error(truth)
        if r == 0:
            curves[h] = np.asarray(est.values)
    return errs, curves


def reproduce_figure(spec: ExperimentSpec, h_list: Optional[Sequence[float]] = None,
                     out_dir=None) -> FigureReport:
    """Inverted CDF curves for several truncations and their sup-norm errors.

    Every replication uses sample size ``n_grid[-1]``; curves are kept for
    replication 0.  With ``out_dir`` the CSV curve files are written there.
    """
    t0 = time.perf_counter()
    h_list = tuple(float(h) for h in (h_list if h_list is not None else spec.h_list))
    if not h_list:
        raise ConfigError("h_list is empty")
    results = _map_reps(_figure_rep, spec, (h_list,))
    x = np.asarray(spec.x_grid)
    report = FigureReport(
        h_list=h_list,
        sup_errors=np.stack([e for e, _ in results]),
        x_grid=x,
        g_true=np.asarray(dc.cdf(spec.model, x)),
        curves=results[0][1],
        runtime_seconds=time.perf_counter() - t0,
    )
    if out_dir is not None:
        report.write(out_dir)
    return report


def _martingale_rep(spec: ExperimentSpec, r: int, s_list: tuple) -> tuple[np.ndarray, float]:
    sample = _simulate(spec, spec.n_grid[-1], r)
    s_arr = np.asarray(s_list)
    phi_true = ms.char_exponent(spec.model, spec.lam, s_arr)
    gamma_true = dc.cf(spec.model, s_arr)
    eps = spec.epsilon(sample)
    gamma_hat, truncated = ce.estimate_gamma_eps(sample, spec.lam, s_arr, eps)
    means = np.empty(s_arr.size, dtype=complex)
    resid = 0.0
    for k, s in enumerate(s_list):
        z = ce.martingale_terms(sample, s, phi_true[k])
        means[k] = z.mean()
        if not truncated[k]:
            denom = np.exp(1j * s * sample.observations[1:]).sum()
            lhs = spec.lam * (gamma_hat[k] - gamma_true[k])
            resid = max(resid, abs(lhs - z.sum() / denom))
    return means, resid


def martingale_diagnostic(spec: ExperimentSpec, s_list: Sequence[float]) -> MartingaleReport:
    """MC mean of ``(1/n) sum Z_j(s)`` and the error-representation residual.

    Uses sample size ``n_grid[-1]``.  The residual is
    ``|lam (gamma_hat - gamma) - sum Z / sum e^{isV}|`` maximised over
    replications and non-truncated ``s``.
    """
    s_list = tuple(float(s) for s in s_list)
    results = _map_reps(_martingale_rep, spec, (s_list,))
    means = np.stack([m for m, _ in results])
    reps = means.shape[0]
    return MartingaleReport(
        s_list=s_list,
        mean=means.mean(axis=0),
        se_re=means.real.std(axis=0, ddof=1) / math.sqrt(reps),
        se_im=means.imag.std(axis=0, ddof=1) / math.sqrt(reps),
        max_identity_residual=float(max(r for _, r in results)),
        replications=reps,
    )


def versions() -> dict:
    import scipy

    return {
        "mg1inversion": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(out_dir, spec: ExperimentSpec, extra: Optional[dict] = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": spec.to_dict(),
        "config_hash": spec.config_hash(),
        "seed_base": spec.seed_base,
        "effective_burn_in": spec.burn_in if spec.burn_in is not None
        else ms.default_burn_in(ms.traffic_intensity(spec.model, spec.lam)),
        "versions": versions(),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def spec_from_manifest(path) -> ExperimentSpec:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return ExperimentSpec.from_dict(json.loads(path.read_text())["config"])


def run_experiment(spec: ExperimentSpec, out_dir, s_list: Optional[Sequence[float]] = None) -> dict:
    """Run ``spec`` and write its CSV outputs and manifest under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary: dict = {"kind": spec.kind}
    if spec.kind in ("cf_mse", "cdf_risk"):
        report = mc_cf_mse(spec) if spec.kind == "cf_mse" else mc_cdf_risk(spec)
        report.to_csv(out / "report.csv")
        report.slopes_to_csv(out / "slopes.csv")
        summary["fitted_slopes"] = {k: list(v) for k, v in report.fitted_slopes.items()}
    elif spec.kind == "figure":
        report = reproduce_figure(spec, out_dir=out)
        summary["median_sup_error"] = {f"{h:g}": v for h, v in report.median_sup_error.items()}
    else:
        report = martingale_diagnostic(spec, s_list if s_list is not None else spec.s_grid)
        report.to_csv(out / "martingale.csv")
        summary["max_identity_residual"] = report.max_identity_residual
        summary["within_4se"] = report.within().tolist()
    write_manifest(out, spec, {"runtime_seconds": time.perf_counter() - t0})
    return summary
