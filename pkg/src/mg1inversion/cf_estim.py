"""Z-estimator of the net-input characteristic exponent and the job-size CF.

All estimators use observations ``V_1..V_n``; ``V_0`` enters only through
the boundary term ``xi * (exp(i s V_n) - exp(i s V_0)) / n``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mg1_sim import WorkloadSample

__all__ = [
    "CfEstimate",
    "DEFAULT_EPSILON",
    "empirical_cf",
    "estimate_phi",
    "estimate_phi_parts",
    "estimate_gamma_eps",
    "choose_epsilon",
    "cf_on_grid",
    "martingale_terms",
]

DEFAULT_EPSILON = 0.01
_CHUNK_ELEMS = 1 << 22
_BLOCK = 64
_REANCHOR = 32
_ZERO_DEN = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class CfEstimate:
    grid: np.ndarray
    values: np.ndarray
    epsilon: float
    truncated_flags: np.ndarray
    lambda_used: float

    def __call__(self, s):
        """Look up estimated values at nodes that lie on the grid."""
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.grid, s)
        idx = np.clip(idx, 0, self.grid.size - 1)
        if not np.array_equal(self.grid[idx], s):
            raise KeyError("requested s values are not on the estimate grid")
        return self.values[idx]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("s,re,im,truncated\n")
            for s, v, t in zip(self.grid.tolist(), self.values.tolist(), self.truncated_flags.tolist()):
                fh.write(f"{s!r},{v.real!r},{v.imag!r},{int(t)}\n")
        return path


def _exp_sum(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``sum_j exp(i s V_j)`` for every ``s``; exact zeros are counted, not exponentiated."""
    n_zero = np.count_nonzero(values == 0.0)
    pos = values[values > 0.0]
    out = np.full(s.shape, complex(n_zero), dtype=complex)
    if pos.size == 0:
        return out
    if s.size >= 4 * _BLOCK and _is_uniform(s):
        return out + _exp_sum_uniform(pos, s)
    step = max(1, _CHUNK_ELEMS // pos.size)
    for lo in range(0, s.size, step):
        block = s[lo:lo + step]
        out[lo:lo + step] += np.exp(1j * np.outer(block, pos)).sum(axis=1)
    return out


def _is_uniform(s: np.ndarray) -> bool:
    d = np.diff(s)
    return bool(d[0] > 0 and np.all(np.abs(d - d[0]) <= 1e-9 * d[0]))


def _exp_sum_uniform(pos: np.ndarray, s: np.ndarray) -> np.ndarray:
    # blocks of _BLOCK nodes advanced by the phase factor exp(i B ds V);
    # re-anchored with a direct exp every _REANCHOR blocks to cap drift
    ds = (s[-1] - s[0]) / (s.size - 1)
    out = np.empty(s.shape, dtype=complex)
    shift = np.exp(1j * (_BLOCK * ds) * pos)
    base = None
    for b, lo in enumerate(range(0, s.size, _BLOCK)):
        hi = min(lo + _BLOCK, s.size)
        if base is None or b % _REANCHOR == 0 or hi - lo < _BLOCK:
            base = np.exp(1j * np.outer(s[lo:hi], pos))
        else:
            base *= shift
        out[lo:hi] = base.sum(axis=1)
    return out


def _pieces(sample: WorkloadSample, s):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    v = sample.observations
    n = sample.n
    total = _exp_sum(v[1:], s)
    boundary = np.exp(1j * s * v[-1]) - np.exp(1j * s * v[0])
    n_zero = np.count_nonzero(v[1:] == 0.0)
    return s, n, total, boundary, n_zero


def _unwrap(arr, scalar: bool):
    return arr[0] if scalar else arr


def empirical_cf(sample: WorkloadSample, s):
    """``(1/n) sum_{j=1}^n exp(i s V_j)``."""
    scalar = np.ndim(s) == 0
    s_arr, n, total, _, _ = _pieces(sample, s)
    out = np.where(s_arr == 0.0, 1.0 + 0j, total / n)
    return _unwrap(out, scalar)


def _phi_from_pieces(s, n, total, boundary, n_zero, xi):
    num = xi / n * boundary - 1j * s * (n_zero / n)
    den = total / n
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = num / den
    return np.where(s == 0.0, 0.0 + 0j, phi), den


def estimate_phi(sample: WorkloadSample, s):
    """Estimated characteristic exponent of the net input.

    Raises ``ZeroDivisionError`` where the empirical workload CF vanishes;
    use :func:`estimate_gamma_eps` for a total estimator.
    """
    scalar = np.ndim(s) == 0
    pieces = _pieces(sample, s)
    phi, den = _phi_from_pieces(*pieces, sample.xi)
    # a sum of unit phasors that cancels leaves only rounding residue
    bad = (np.abs(den) <= _ZERO_DEN) & (pieces[0] != 0.0)
    if np.any(bad):
        raise ZeroDivisionError(f"empirical workload CF vanishes at s={pieces[0][bad][0]!r}")
    return _unwrap(phi, scalar)


def estimate_phi_parts(sample: WorkloadSample, s):
    """Vectorised ``(phi_hat, empirical_cf)`` without the zero-denominator check."""
    pieces = _pieces(sample, s)
    return _phi_from_pieces(*pieces, sample.xi)


def estimate_gamma_eps(sample: WorkloadSample, lam: float, s, epsilon: float = DEFAULT_EPSILON):
    """Truncation-modified job-size CF estimate.

    Returns ``(value, truncated)``.  Where ``|empirical_cf| <= epsilon`` the
    value is the constant ``(1 - epsilon) * (1 + 1j)`` and ``truncated`` is
    True; otherwise ``value = (phi_hat + i s) / lam + 1``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    scalar = np.ndim(s) == 0
    pieces = _pieces(sample, s)
    s_arr = pieces[0]
    phi, den = _phi_from_pieces(*pieces, sample.xi)
    truncated = (np.abs(den) <= epsilon) & (s_arr != 0.0)
    with np.errstate(invalid="ignore"):
        gamma = (phi + 1j * s_arr) / lam + 1.0
    gamma = np.where(truncated, (1.0 - epsilon) * (1.0 + 1j), gamma)
    gamma = np.where(s_arr == 0.0, 1.0 + 0j, gamma)
    return _unwrap(gamma, scalar), _unwrap(truncated, scalar)


def choose_epsilon(sample: WorkloadSample, default: float = DEFAULT_EPSILON) -> float:
    """``min(default, zero_fraction / 2)`` over ``V_1..V_n``.

    A sample without any empty-system observation gives no usable bound;
    the default is returned with a warning.
    """
    obs = sample.observations[1:]
    if obs.size == 0:
        raise ValueError("empty sample")
    frac = np.count_nonzero(obs == 0.0) / obs.size
    if frac == 0.0:
        warnings.warn("sample contains no zero observations; using the default epsilon",
                      RuntimeWarning, stacklevel=2)
        return default
    return float(min(default, 0.5 * frac))


def cf_on_grid(sample: WorkloadSample, lam: float, epsilon: float, grid) -> CfEstimate:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D array")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be nonnegative and strictly increasing")
    values, flags = estimate_gamma_eps(sample, lam, grid, epsilon)
    values = np.asarray(values)
    flags = np.asarray(flags)
    for a in (grid, values, flags):
        a.setflags(write=False)
    return CfEstimate(grid=grid, values=values, epsilon=float(epsilon),
                      truncated_flags=flags, lambda_used=float(lam))


def martingale_terms(sample: WorkloadSample, s: float, phi: complex) -> np.ndarray:
    """``Z_j(s) = (xi - phi) e^{isV_j} - xi e^{isV_{j-1}} - i s 1{V_j = 0}`` for ``j = 1..n``.

    ``phi`` is the true characteristic exponent at ``s``.
    """
    v = sample.observations
    e = np.exp(1j * s * v)
    return (sample.xi - phi) * e[1:] - sample.xi * e[:-1] - 1j * s * (v[1:] == 0.0)
