"""Event-driven simulation of the M/G/1 workload observed at Poisson epochs.

The workload jumps by a job size at every arrival and drains at unit rate
in between, reflected at zero.  Because the state is updated analytically
from one event to the next, an observation that hits the empty system is
exactly ``0.0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dist_catalog as dc
from .dist_catalog import JobSizeModel
from .errors import ConfigError, NumericError

__all__ = [
    "WorkloadSample",
    "ConfigError",
    "default_burn_in",
    "simulate",
    "simulate_transitions",
    "empirical_zero_fraction",
    "empirical_busy_fraction",
    "traffic_intensity",
    "lst_exponent",
    "char_exponent",
    "psi_inverse",
    "conditional_atom_oracle",
    "conditional_cf_oracle",
    "gpk_cf",
    "write_sample_csv",
    "read_sample_csv",
]


@dataclass(frozen=True)
class WorkloadSample:
    """Probe observations ``(V_0, ..., V_n)`` with their metadata."""

    observations: np.ndarray
    lam: float
    xi: float
    rho: float = float("nan")
    seed: Optional[int] = None
    burn_in_discarded: int = 0
    model: Optional[JobSizeModel] = None
    times: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        obs = np.array(self.observations, dtype=float)
        if obs.ndim != 1 or obs.size < 2:
            raise ConfigError("a workload sample needs at least two observations")
        if np.any(obs < 0) or not np.all(np.isfinite(obs)):
            raise ConfigError("workload observations must be finite and nonnegative")
        if not (self.lam > 0 and self.xi > 0):
            raise ConfigError("lambda and xi must be positive")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        if self.times is not None:
            t = np.array(self.times, dtype=float)
            t.setflags(write=False)
            object.__setattr__(self, "times", t)

    @property
    def n(self) -> int:
        """Number of transitions, i.e. ``len(observations) - 1``."""
        return self.observations.size - 1

    def metadata(self) -> dict:
        return {
            "lambda": self.lam,
            "xi": self.xi,
            "rho": self.rho,
            "seed": self.seed,
            "burn_in": self.burn_in_discarded,
            "n": self.n,
            "model": None if self.model is None else self.model.to_dict(),
        }


def traffic_intensity(model: JobSizeModel, lam: float) -> float:
    return lam * dc.mean(model)


def default_burn_in(rho: float) -> int:
    return max(1000, math.ceil(20.0 / (1.0 - rho)))


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def simulate(
    model: JobSizeModel,
    lam: float,
    xi: float,
    n: int,
    burn_in: Optional[int] = None,
    seed: int = 0,
) -> WorkloadSample:
    """Simulate ``n + 1`` stationary workload observations at Poisson(xi) epochs.

    The system starts empty and the first ``burn_in`` probe observations are
    discarded (default ``max(1000, ceil(20 / (1 - rho)))``).  Arrival times,
    probe times and job sizes come from three independent child streams of
    ``seed``.
    """
    if not (lam > 0 and xi > 0):
        raise ConfigError("lambda and xi must be positive")
    if n < 2:
        raise ConfigError("n must be at least 2")
    rho = traffic_intensity(model, lam)
    if rho >= 1.0:
        raise ConfigError(f"unstable system: rho = {rho:.4f} >= 1")
    if burn_in is None:
        burn_in = default_burn_in(rho)
    if burn_in < 0:
        raise ConfigError("burn_in must be nonnegative")

    arr_rng, probe_rng, size_rng = _streams(seed)
    n_probes = n + 1 + burn_in
    probe_t = np.cumsum(probe_rng.exponential(1.0 / xi, size=n_probes))
    horizon = probe_t[-1]

    # draw arrival gaps in blocks until the horizon is covered
    expected = lam * horizon
    chunks = []
    total = 0.0
    block = int(expected + 10.0 * math.sqrt(expected + 1.0)) + 16
    while total <= horizon:
        gaps = arr_rng.exponential(1.0 / lam, size=block)
        c = total + np.cumsum(gaps)
        chunks.append(c)
        total = c[-1]
        block = max(16, block // 4)
    arr_t = np.concatenate(chunks)
    arr_t = arr_t[arr_t <= horizon]
    sizes = dc.sample(model, size_rng, size=arr_t.size)

    values = _run_events(arr_t, sizes, probe_t)
    return WorkloadSample(
        observations=values[burn_in:],
        lam=float(lam),
        xi=float(xi),
        rho=float(rho),
        seed=int(seed),
        burn_in_discarded=int(burn_in),
        model=model,
        times=probe_t[burn_in:],
    )


def _run_events(arr_t: np.ndarray, sizes: np.ndarray, probe_t: np.ndarray) -> np.ndarray:
    # merge both clocks; at equal times the arrival is processed first
    times = np.concatenate([arr_t, probe_t])
    is_probe = np.concatenate([np.zeros(arr_t.size, bool), np.ones(probe_t.size, bool)])
    jumps = np.concatenate([sizes, np.zeros(probe_t.size)])
    order = np.argsort(times, kind="stable")
    out = []
    v = 0.0
    last = 0.0
    for t, probe, b in zip(times[order].tolist(), is_probe[order].tolist(), jumps[order].tolist()):
        gap = t - last
        last = t
        v = v - gap if v > gap else 0.0
        if probe:
            out.append(v)
        else:
            v += b
    return np.asarray(out, dtype=float)


def simulate_transitions(
    model: JobSizeModel,
    lam: float,
    xi: float,
    v_prev: float,
    size: int,
    seed: int = 0,
) -> np.ndarray:
    """Workload one exponential(xi) probe gap after starting at ``v_prev``.

    Returns ``size`` independent draws of ``V_j`` given ``V_{j-1} = v_prev``.
    """
    rng = np.random.default_rng(seed)
    v = np.full(size, float(v_prev))
    remaining = rng.exponential(1.0 / xi, size=size)
    active = np.arange(size)
    while active.size:
        gap = rng.exponential(1.0 / lam, size=active.size)
        done = gap >= remaining[active]
        idx = active[done]
        v[idx] = np.maximum(v[idx] - remaining[idx], 0.0)
        idx = active[~done]
        g = gap[~done]
        v[idx] = np.maximum(v[idx] - g, 0.0) + dc.sample(model, rng, size=idx.size)
        remaining[idx] -= g
        active = idx
    return v


def empirical_zero_fraction(sample) -> float:
    obs = sample.observations if isinstance(sample, WorkloadSample) else np.asarray(sample, dtype=float)
    if obs.size == 0:
        raise ConfigError("empty sample")
    return float(np.count_nonzero(obs == 0.0)) / obs.size


def empirical_busy_fraction(sample) -> float:
    return 1.0 - empirical_zero_fraction(sample)


def lst_exponent(model: JobSizeModel, lam: float, s):
    """Net-input Laplace exponent ``s - lam * (1 - E exp(-s B))``."""
    s = np.asarray(s, dtype=float)
    out = s - lam * (1.0 - dc.lst(model, s))
    return out[()] if np.ndim(out) == 0 else out


def char_exponent(model: JobSizeModel, lam: float, s):
    """Net-input characteristic exponent ``lam * (cf(s) - 1) - i s``."""
    s = np.asarray(s, dtype=float)
    out = lam * (dc.cf(model, s) - 1.0) - 1j * s
    return out[()] if np.ndim(out) == 0 else out


def gpk_cf(model: JobSizeModel, lam: float, s):
    """Stationary workload CF ``-i s (1 - rho) / phi(s)``, equal to 1 at ``s = 0``.

    This is the Laplace-domain form ``s (1 - rho) / l(s)`` evaluated at
    ``-i s``, using ``phi(s) = l(-i s)``.
    """
    s = np.asarray(s, dtype=float)
    rho = traffic_intensity(model, lam)
    phi = char_exponent(model, lam, s)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(s == 0.0, 1.0 + 0j, -1j * s * (1.0 - rho) / np.where(s == 0.0, 1.0, phi))
    return out[()] if out.ndim == 0 else out


def psi_inverse(model: JobSizeModel, lam: float, q: float) -> float:
    """Solve ``lst_exponent(psi) = q`` for ``psi > 0`` by bisection on ``[0, q + lam]``."""
    if not q > 0:
        raise ValueError("q must be positive")
    if traffic_intensity(model, lam) >= 1.0:
        raise ConfigError("psi is only defined for a stable system")
    lo, hi = 0.0, q + lam
    if lst_exponent(model, lam, hi) < q:
        raise NumericError("failed to bracket the root of the Laplace exponent")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lst_exponent(model, lam, mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * min(1.0, hi) + 1e-300:
            break
    return 0.5 * (lo + hi)


def conditional_atom_oracle(model: JobSizeModel, lam: float, xi: float, v_prev: float) -> float:
    """``P(V_j = 0 | V_{j-1} = v_prev) = xi exp(-psi(xi) v_prev) / psi(xi)``."""
    psi = psi_inverse(model, lam, xi)
    return xi * math.exp(-psi * v_prev) / psi


def conditional_cf_oracle(model: JobSizeModel, lam: float, xi: float, v_prev: float, s):
    """``E[exp(i s V_j) | V_{j-1} = v_prev]`` in closed form."""
    s = np.asarray(s, dtype=float)
    atom = conditional_atom_oracle(model, lam, xi, v_prev)
    phi = char_exponent(model, lam, s)
    out = xi / (xi - phi) * (np.exp(1j * s * v_prev) + 1j * s / xi * atom)
    return out[()] if np.ndim(out) == 0 else out


def write_sample_csv(sample: WorkloadSample, path) -> Path:
    """Write ``index,t,V`` rows plus a ``<stem>.json`` metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    times = sample.times if sample.times is not None else np.full(sample.observations.size, np.nan)
    with open(path, "w", newline="") as fh:
        fh.write("index,t,V\n")
        for k, (t, v) in enumerate(zip(times.tolist(), sample.observations.tolist())):
            fh.write(f"{k},{t!r},{v!r}\n")
    meta = path.with_suffix(".json")
    meta.write_text(json.dumps(sample.metadata(), indent=2, sort_keys=True) + "\n")
    return path


def read_sample_csv(path, lam: Optional[float] = None, xi: Optional[float] = None) -> WorkloadSample:
    """Load a sample CSV.

    ``lam`` and ``xi`` override the sidecar metadata; for external data
    without a sidecar they are required.  A ``V`` column is mandatory, the
    ``t`` column is optional.
    """
    path = Path(path)
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    names = data.dtype.names or ()
    if "V" not in names:
        raise ConfigError(f"{path}: missing 'V' column")
    obs = np.atleast_1d(data["V"])
    times = np.atleast_1d(data["t"]) if "t" in names else None
    meta = {}
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    lam = lam if lam is not None else meta.get("lambda")
    xi = xi if xi is not None else meta.get("xi")
    if lam is None or xi is None:
        raise ConfigError("lambda and xi must be supplied for data without metadata")
    model = JobSizeModel.from_dict(meta["model"]) if meta.get("model") else None
    return WorkloadSample(
        observations=obs,
        lam=float(lam),
        xi=float(xi),
        rho=float(meta.get("rho", float("nan")) or float("nan")),
        seed=meta.get("seed"),
        burn_in_discarded=int(meta.get("burn_in", 0) or 0),
        model=model,
        times=times,
    )
