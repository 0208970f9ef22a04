"""Joint estimation of the arrival rate and the job-size CDF.

When ``lambda`` is unknown it is pinned down by the utilisation identity

    busy_fraction = lambda * int_0^k (1 - G_hat(x; lambda)) dx,

where ``G_hat(.; lambda)`` is the inversion estimator computed with that
rate.  The equation is solved by a damped fixed-point iteration, by
default accelerated with Steffensen's method because the plain damped map
contracts very slowly when the load is high.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import cdf_invert as ci
from .cf_estim import choose_epsilon, estimate_phi_parts
from .errors import ConfigError, NumericError
from .mg1_sim import WorkloadSample, empirical_busy_fraction

__all__ = [
    "JointEstimate",
    "solve_rate_equation",
    "estimate_joint",
    "choose_outer_truncation",
    "outer_nodes",
]

DEFAULT_OMEGA = 0.5
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 100
DEFAULT_METHOD = "steffensen"
METHODS = ("fixed_point", "steffensen")


@dataclass(frozen=True)
class JointEstimate:
    lambda_hat: float
    cdf: ci.CdfEstimate
    k: float
    iterations: int
    converged: bool
    residual: float
    trace: tuple = field(default=(), repr=False)

    def summary(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "k": self.k,
            "h": self.cdf.h,
        }


def outer_nodes(k: float, count: int) -> np.ndarray:
    """Midpoints of ``count`` equal panels on ``(0, k]``."""
    return (np.arange(count) + 0.5) * (k / count)


def solve_rate_equation(
    busy_fraction: float,
    cdf_given_rate: Callable[[float], np.ndarray],
    k: float,
    lam0: float,
    omega: float = DEFAULT_OMEGA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = DEFAULT_METHOD,
) -> tuple[float, int, bool, float, tuple]:
    """Damped fixed point ``lam <- (1 - omega) lam + omega * busy / I(lam)``.

    ``cdf_given_rate(lam)`` returns the CDF at the midpoint nodes of ``(0, k]``
    so that ``I(lam) = k * mean(1 - G)``.  With ``method="steffensen"`` each
    iteration applies the damped map twice and takes the Aitken extrapolate
    when it is usable, otherwise the second plain iterate.  Returns
    ``(lam, iterations, converged, residual, trace)``.
    """
    if not 0.0 < omega <= 1.0:
        raise ConfigError("omega must lie in (0, 1]")
    if not (lam0 > 0 and k > 0 and tol > 0):
        raise ConfigError("lam0, k and tol must be positive")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    trace = [float(lam0)]

    def step(lam: float) -> float:
        g = np.asarray(cdf_given_rate(lam), dtype=float)
        integral = k * float(np.mean(1.0 - g))
        if not integral > 0:
            raise NumericError(
                f"utilisation integral is {integral!r} at lambda={lam!r}; iterates: {trace}"
            )
        return (1.0 - omega) * lam + omega * busy_fraction / integral

    lam = float(lam0)
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = step(lam)
        if method == "steffensen" and abs(new - lam) > tol * lam:
            second = step(new)
            curvature = second - 2.0 * new + lam
            accel = lam - (new - lam) ** 2 / curvature if curvature != 0 else math.nan
            new = accel if math.isfinite(accel) and accel > 0 else second
        residual = abs(new - lam) / lam
        lam = new
        trace.append(lam)
        if residual <= tol:
            return lam, it, True, residual, tuple(trace)
    return lam, max_iter, False, residual, tuple(trace)


def choose_outer_truncation(sample: WorkloadSample) -> float:
    """``max(1.2 * max(V), 5 * mean(V | V > 0))``."""
    obs = sample.observations
    pos = obs[obs > 0]
    if pos.size == 0:
        raise ConfigError("sample has no positive observations")
    return float(max(1.2 * obs.max(), 5.0 * pos.mean()))


def estimate_joint(
    sample: WorkloadSample,
    h: float,
    k: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    omega: float = DEFAULT_OMEGA,
    lam0: Optional[float] = None,
    epsilon: Optional[float] = None,
    panels: Optional[int] = None,
    x_panels: Optional[int] = None,
    method: str = DEFAULT_METHOD,
    clamp: bool = False,
) -> JointEstimate:
    """Estimate ``lambda`` and ``G`` together from workload observations.

    The initial rate defaults to the sampling rate ``xi``.  By default the
    CDF inside the iteration is left unclamped: projecting it onto ``[0, 1]``
    biases ``I(lambda)`` upwards wherever the inversion oscillates.  The
    returned CDF is always clamped.
    """
    busy = empirical_busy_fraction(sample)
    if not 0.0 < busy < 1.0:
        raise ConfigError(f"busy fraction {busy} must lie strictly between 0 and 1")
    if not h > 0:
        raise ConfigError("h must be positive")
    k = choose_outer_truncation(sample) if k is None else float(k)
    if not k > 0:
        raise ConfigError("k must be positive")
    if epsilon is None:
        epsilon = choose_epsilon(sample)
    panels = ci.default_panels(h, k) if panels is None else int(panels)
    x_panels = max(512, math.ceil(20.0 * h * k)) if x_panels is None else int(x_panels)

    nodes = ci.midpoint_nodes(h, panels)
    x = outer_nodes(k, x_panels)
    # gamma_hat(s; lam) = rate_part(s) / lam + const_part(s)
    rate_part, const_part = _split_gamma(sample, nodes, epsilon)
    rate_term = ci.sine_transform(rate_part, nodes, x, h)
    const_term = ci.sine_transform(const_part, nodes, x, h)

    def raw_cdf(lam: float) -> np.ndarray:
        return 0.5 - (rate_term / lam + const_term) / math.pi

    def cdf_given_rate(lam: float) -> np.ndarray:
        g = raw_cdf(lam)
        return np.clip(g, 0.0, 1.0) if clamp else g

    lam0 = sample.xi if lam0 is None else float(lam0)
    lam, iters, converged, residual, trace = solve_rate_equation(
        busy, cdf_given_rate, k, lam0, omega=omega, tol=tol, max_iter=max_iter, method=method
    )
    values = np.clip(raw_cdf(lam), 0.0, 1.0)
    values.setflags(write=False)
    x.setflags(write=False)
    cdf = ci.CdfEstimate(x_grid=x, values=values, h=float(h), quadrature_panels=panels, clamped=True)
    return JointEstimate(lambda_hat=lam, cdf=cdf, k=k, iterations=iters,
                         converged=converged, residual=residual, trace=trace)


def _split_gamma(sample: WorkloadSample, nodes: np.ndarray, epsilon: float):
    phi, den = estimate_phi_parts(sample, nodes)
    truncated = np.abs(den) <= epsilon
    rate_part = np.where(truncated, 0.0, phi + 1j * nodes)
    const_part = np.where(truncated, (1.0 - epsilon) * (1.0 + 1j), 1.0 + 0j)
    return rate_part, const_part
