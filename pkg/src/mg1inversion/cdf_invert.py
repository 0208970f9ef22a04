"""Truncated Fourier inversion of a characteristic function into a CDF.

``G_h(x) = 1/2 - (1/pi) * int_0^h Im{gamma(s) exp(-i s x)} / s ds``

The integral is evaluated with a composite midpoint rule, which never
touches the removable singularity at ``s = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .cf_estim import CfEstimate, cf_on_grid, choose_epsilon
from .errors import NumericError
from .mg1_sim import WorkloadSample

__all__ = [
    "CdfEstimate",
    "MIN_PANELS",
    "midpoint_nodes",
    "sine_transform",
    "default_panels",
    "invert_cdf",
    "invert_on_grid",
    "choose_truncation",
    "truncation_bias_bound",
    "estimate_cdf",
]

MIN_PANELS = 16
_DEFAULT_MIN_PANELS = 4096
_CHUNK_ELEMS = 1 << 22

CfSource = Union[CfEstimate, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class CdfEstimate:
    x_grid: np.ndarray
    values: np.ndarray
    h: float
    quadrature_panels: int
    clamped: bool = False

    def to_csv(self, path, column: str = "G_hat") -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"x,{column}\n")
            for x, g in zip(self.x_grid.tolist(), self.values.tolist()):
                fh.write(f"{x!r},{g!r}\n")
        return path

    def sup_error(self, truth) -> float:
        return float(np.max(np.abs(self.values - np.asarray(truth))))


def midpoint_nodes(h: float, panels: int) -> np.ndarray:
    """Midpoints of ``panels`` equal panels on ``(0, h]``."""
    return (np.arange(panels) + 0.5) * (h / panels)


def default_panels(h: float, x_max: float) -> int:
    """At least ten nodes per oscillation period ``2 pi / x`` of the integrand."""
    return max(_DEFAULT_MIN_PANELS, math.ceil(64.0 * h * (1.0 + x_max)))


def _cf_values(cf_source: CfSource, nodes: np.ndarray) -> np.ndarray:
    vals = np.asarray(cf_source(nodes), dtype=complex)
    if vals.shape != nodes.shape:
        vals = np.broadcast_to(vals, nodes.shape).astype(complex)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise NumericError(f"characteristic function is not finite at s={nodes[bad][0]!r}")
    return vals


def sine_transform(vals: np.ndarray, nodes: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    """Midpoint rule for ``int_0^h Im{vals(s) exp(-i s x)} / s ds`` at every ``x``."""
    # Im{(a + ib) e^{-isx}} = b cos(sx) - a sin(sx)
    w = (h / nodes.size) / nodes
    a = vals.real * w
    b = vals.imag * w
    out = np.empty(x.size)
    step = max(1, _CHUNK_ELEMS // nodes.size)
    for lo in range(0, x.size, step):
        sx = np.outer(x[lo:lo + step], nodes)
        out[lo:lo + step] = np.cos(sx) @ b - np.sin(sx) @ a
    return out


def _integrate(vals: np.ndarray, nodes: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    return 0.5 - sine_transform(vals, nodes, x, h) / math.pi


def invert_cdf(cf_source: CfSource, x: float, h: float, panels: Optional[int] = None) -> float:
    """Inverted CDF at a single point ``x``."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h == 0:
        return 0.5
    panels = default_panels(h, x) if panels is None else int(panels)
    if panels < MIN_PANELS:
        raise ValueError(f"need at least {MIN_PANELS} panels")
    nodes = midpoint_nodes(h, panels)
    vals = _cf_values(cf_source, nodes)
    return float(_integrate(vals, nodes, np.array([float(x)]), h)[0])


def invert_on_grid(
    cf_source: CfSource,
    x_grid,
    h: float,
    panels: Optional[int] = None,
    clamp: bool = False,
) -> CdfEstimate:
    """Inverted CDF on an increasing grid of nonnegative ``x``.

    ``cf_source`` is either a vectorised callable ``s -> gamma(s)`` or a
    :class:`CfEstimate` computed on :func:`midpoint_nodes` ``(h, panels)``.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("x_grid must be a nonempty 1-D array")
    if np.any(x < 0) or np.any(np.diff(x) < 0):
        raise ValueError("x_grid must be nonnegative and increasing")
    if h < 0:
        raise ValueError("h must be nonnegative")
    if isinstance(cf_source, CfEstimate) and panels is None:
        panels = cf_source.grid.size
    panels = default_panels(h, float(x[-1])) if panels is None else int(panels)
    if panels < MIN_PANELS:
        raise ValueError(f"need at least {MIN_PANELS} panels")
    if h == 0:
        values = np.full(x.size, 0.5)
    else:
        nodes = midpoint_nodes(h, panels)
        values = _integrate(_cf_values(cf_source, nodes), nodes, x, h)
    if clamp:
        values = np.clip(values, 0.0, 1.0)
    x = x.copy()
    for a in (x, values):
        a.setflags(write=False)
    return CdfEstimate(x_grid=x, values=values, h=float(h), quadrature_panels=panels, clamped=bool(clamp))


def choose_truncation(n: int, eta: float) -> float:
    """Truncation ``h_n = n ** (1 / (2 (1 + eta)))`` balancing bias and variance."""
    if n < 1 or not eta > 0:
        raise ValueError("need n >= 1 and eta > 0")
    return float(n ** (1.0 / (2.0 * (1.0 + eta))))


def truncation_bias_bound(eta: float, c0: float, h: float, scale: str = "cf") -> float:
    """Bound ``c0 * h**-eta / eta`` on the neglected tail integral.

    ``scale="cdf"`` divides by ``pi`` to express it on the CDF scale.
    """
    if not (eta > 0 and c0 > 0 and h > 0):
        raise ValueError("eta, c0 and h must be positive")
    bound = c0 * h ** (-eta) / eta
    if scale == "cdf":
        return bound / math.pi
    if scale != "cf":
        raise ValueError("scale must be 'cf' or 'cdf'")
    return bound


def estimate_cdf(
    sample: WorkloadSample,
    lam: float,
    x_grid,
    h: float,
    epsilon: Optional[float] = None,
    panels: Optional[int] = None,
    clamp: bool = False,
) -> tuple[CdfEstimate, CfEstimate]:
    """Estimate the job-size CDF from workload observations with known ``lam``."""
    x = np.asarray(x_grid, dtype=float)
    if epsilon is None:
        epsilon = choose_epsilon(sample)
    panels = default_panels(h, float(x[-1])) if panels is None else int(panels)
    if h == 0:
        empty = cf_on_grid(sample, lam, epsilon, [0.0])
        return invert_on_grid(empty, x, 0.0, panels=panels, clamp=clamp), empty
    cf_est = cf_on_grid(sample, lam, epsilon, midpoint_nodes(h, panels))
    return invert_on_grid(cf_est, x, h, panels=panels, clamp=clamp), cf_est
