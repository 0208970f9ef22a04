"""Command-line entry point.

Subcommands: ``simulate``, ``estimate-cf``, ``estimate-cdf``, ``joint`` and
``experiment``.  Each takes an optional JSON ``--config`` whose values are
overridden by explicit flags, and writes its outputs plus ``manifest.json``
to ``--out``.  Exit codes: 0 ok, 2 configuration error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import cdf_invert as ci
from . import cf_estim as ce
from . import harness
from . import joint_lambda as jl
from . import mg1_sim as ms
from .dist_catalog import JobSizeModel
from .errors import ConfigError, NumericError

log = logging.getLogger("mg1inversion")


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _pick(args, cfg: dict, flag: str, key: Optional[str] = None, default=None):
    val = getattr(args, flag, None)
    if val is not None:
        return val
    return cfg.get(key or flag, default)


def _write_manifest(out: Path, command: str, config: dict) -> None:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": config.get("seed"),
        "versions": harness.versions(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_sample(args, cfg: dict) -> ms.WorkloadSample:
    path = _pick(args, cfg, "sample")
    if not path:
        raise ConfigError("--sample is required")
    return ms.read_sample_csv(path, lam=_pick(args, cfg, "lam", "lambda"), xi=_pick(args, cfg, "xi"))


def _truncation(args, cfg: dict, n: int, sample: ms.WorkloadSample) -> float:
    h = _pick(args, cfg, "h")
    if h is not None:
        return float(h)
    eta = _pick(args, cfg, "eta")
    if eta is None and sample.model is not None:
        eta = sample.model.eta
    if eta is None:
        raise ConfigError("either --h or --eta is required")
    return ci.choose_truncation(n, float(eta))


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if "model" not in cfg:
        raise ConfigError("simulate needs a config with a 'model' entry")
    model = JobSizeModel.from_dict(cfg["model"])
    config = {
        "model": model.to_dict(),
        "lambda": float(_pick(args, cfg, "lam", "lambda")),
        "xi": float(_pick(args, cfg, "xi", default=1.0)),
        "n": int(_pick(args, cfg, "n", default=10_000)),
        "burn_in": _pick(args, cfg, "burn_in"),
        "seed": int(_pick(args, cfg, "seed", default=0)),
    }
    sample = ms.simulate(model, config["lambda"], config["xi"], config["n"],
                         burn_in=config["burn_in"], seed=config["seed"])
    config["burn_in"] = sample.burn_in_discarded
    out = Path(args.out)
    ms.write_sample_csv(sample, out / "sample.csv")
    _write_manifest(out, "simulate", config)
    log.info("wrote %d observations to %s", sample.observations.size, out / "sample.csv")
    return 0


def cmd_estimate_cf(args) -> int:
    cfg = _load_config(args.config)
    sample = _load_sample(args, cfg)
    eps = _pick(args, cfg, "epsilon")
    eps = ce.choose_epsilon(sample) if eps is None else float(eps)
    s_max = float(_pick(args, cfg, "s_max", default=10.0))
    s_step = float(_pick(args, cfg, "s_step", default=0.01))
    grid = np.arange(0.0, s_max + 0.5 * s_step, s_step)
    est = ce.cf_on_grid(sample, sample.lam, eps, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    est.to_csv(out / "cf.csv")
    _write_manifest(out, "estimate-cf", {
        "sample": str(_pick(args, cfg, "sample")), "lambda": sample.lam, "xi": sample.xi,
        "epsilon": eps, "s_max": s_max, "s_step": s_step,
        "truncated_count": int(np.count_nonzero(est.truncated_flags)),
    })
    return 0


def cmd_estimate_cdf(args) -> int:
    cfg = _load_config(args.config)
    sample = _load_sample(args, cfg)
    h = _truncation(args, cfg, sample.n, sample)
    eps = _pick(args, cfg, "epsilon")
    eps = ce.choose_epsilon(sample) if eps is None else float(eps)
    x_max = float(_pick(args, cfg, "x_max", default=5.0))
    x_points = int(_pick(args, cfg, "x_points", default=201))
    x = np.linspace(0.0, x_max, x_points)
    clamp = bool(args.clamp or cfg.get("clamp", False))
    cdf, _ = ci.estimate_cdf(sample, sample.lam, x, h, epsilon=eps,
                             panels=_pick(args, cfg, "panels"), clamp=clamp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cdf.to_csv(out / "cdf.csv")
    config = {
        "sample": str(_pick(args, cfg, "sample")), "lambda": sample.lam, "xi": sample.xi,
        "n": sample.n, "h": h, "epsilon": eps, "x_max": x_max, "x_points": x_points,
        "panels": cdf.quadrature_panels, "clamp": clamp,
    }
    _write_manifest(out, "estimate-cdf", config)
    print(json.dumps({"h": h, "n": sample.n, "panels": cdf.quadrature_panels}))
    return 0


def cmd_joint(args) -> int:
    cfg = _load_config(args.config)
    path = _pick(args, cfg, "sample")
    if not path:
        raise ConfigError("--sample is required")
    # lambda is the unknown here; the placeholder only satisfies the container
    sample = ms.read_sample_csv(path, lam=1.0, xi=_pick(args, cfg, "xi"))
    h = _truncation(args, cfg, sample.n, sample)
    k = _pick(args, cfg, "k")
    res = jl.estimate_joint(
        sample, h,
        k=None if k in (None, "auto") else float(k),
        tol=float(_pick(args, cfg, "tol", default=jl.DEFAULT_TOL)),
        max_iter=int(_pick(args, cfg, "max_iter", default=jl.DEFAULT_MAX_ITER)),
        omega=float(_pick(args, cfg, "omega", default=jl.DEFAULT_OMEGA)),
        lam0=_pick(args, cfg, "lam0"),
        epsilon=_pick(args, cfg, "epsilon"),
        method=_pick(args, cfg, "method", default=jl.DEFAULT_METHOD),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.cdf.to_csv(out / "cdf.csv")
    summary = res.summary()
    (out / "joint.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "joint", {"sample": str(path), "xi": sample.xi, **summary})
    print(json.dumps(summary))
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config)
    if not cfg:
        raise ConfigError("experiment needs --config")
    for flag, key in (("seed_base", "seed_base"), ("replications", "replications"), ("workers", "workers")):
        if getattr(args, flag) is not None:
            cfg[key] = getattr(args, flag)
    s_list = cfg.pop("s_list", None)
    spec = harness.ExperimentSpec.from_dict(cfg)
    summary = harness.run_experiment(spec, args.out, s_list=s_list)
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mg1inversion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sample=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", required=True, help="output run directory")
        if sample:
            p.add_argument("--sample", help="sample CSV with a V column")
            p.add_argument("--xi", type=float, help="probe rate (needed without metadata)")
            p.add_argument("--epsilon", type=float)

    p = sub.add_parser("simulate", help="simulate probe observations of the workload")
    common(p, sample=False)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-cf", help="estimate the job-size CF on a grid")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--s-step", dest="s_step", type=float)
    p.set_defaults(func=cmd_estimate_cf)

    p = sub.add_parser("estimate-cdf", help="estimate the job-size CDF with known lambda")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--h", type=float, help="truncation; default n**(1/(2(1+eta)))")
    p.add_argument("--eta", type=float)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--x-points", dest="x_points", type=int)
    p.add_argument("--panels", type=int)
    p.add_argument("--clamp", action="store_true")
    p.set_defaults(func=cmd_estimate_cdf)

    p = sub.add_parser("joint", help="estimate lambda and the CDF together")
    common(p)
    p.add_argument("--h", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--k", help="outer truncation or 'auto'")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--lam0", type=float)
    p.add_argument("--method", choices=("fixed_point", "steffensen"))
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("experiment", help="run a Monte-Carlo experiment")
    common(p, sample=False)
    p.add_argument("--seed-base", dest="seed_base", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
