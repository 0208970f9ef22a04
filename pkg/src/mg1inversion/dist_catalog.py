"""Job-size laws with exact CDF, characteristic function, LST and sampler.

Four families are supported: gamma mixtures (with the exponential as the
single-term special case), the log-normal, and the absolute value of a
normal variable ("truncated normal").  Gamma rates ``beta`` are RATE
parameters, so a component has mean ``alpha / beta`` and CF
``(beta / (beta - i s)) ** alpha``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy import integrate, special, stats

__all__ = [
    "Kind",
    "JobSizeModel",
    "gamma_mixture",
    "exponential",
    "lognormal",
    "truncated_normal",
    "example1_mixture",
    "cf",
    "lst",
    "cdf",
    "pdf",
    "sample",
    "mean",
    "moment3",
    "smoothness_eta",
    "tail_constant",
]

# quadrature-based transforms
_TAIL_PROB = 1e-10
_QUAD_EPSABS = 1e-8
_TRUNCNORM_DEFAULT_ETA = 8.0


class Kind(str, enum.Enum):
    GAMMA_MIXTURE = "GammaMixture"
    EXPONENTIAL = "Exponential"
    LOGNORMAL = "LogNormal"
    TRUNCATED_NORMAL = "TruncatedNormal"


@dataclass(frozen=True)
class JobSizeModel:
    """A job-size law.

    ``alpha``, ``beta`` and ``p`` are used by the gamma families, ``mu`` and
    ``sigma`` by the log-normal and truncated normal.  ``eta`` is the
    polynomial decay exponent of ``|cf(s)|`` used to pick the inversion
    truncation.
    """

    kind: Kind
    alpha: tuple[float, ...] = ()
    beta: tuple[float, ...] = ()
    p: tuple[float, ...] = ()
    mu: float = 0.0
    sigma: float = 1.0
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (Kind.GAMMA_MIXTURE, Kind.EXPONENTIAL):
            a = tuple(float(v) for v in self.alpha)
            b = tuple(float(v) for v in self.beta)
            w = tuple(float(v) for v in self.p)
            if not (len(a) == len(b) == len(w) and len(a) > 0):
                raise ValueError("alpha, beta and p must be nonempty and of equal length")
            if min(a) <= 0 or min(b) <= 0 or min(w) <= 0:
                raise ValueError("alpha, beta and p must be strictly positive")
            if abs(sum(w) - 1.0) > 1e-9:
                raise ValueError(f"mixture weights sum to {sum(w)}, expected 1")
            if kind is Kind.EXPONENTIAL and (len(a) != 1 or a[0] != 1.0):
                raise ValueError("Exponential is a single gamma term with alpha=1")
            object.__setattr__(self, "alpha", a)
            object.__setattr__(self, "beta", b)
            object.__setattr__(self, "p", w)
            if self.eta is None:
                object.__setattr__(self, "eta", min(a))
        else:
            if not self.sigma > 0:
                raise ValueError("sigma must be positive")
            object.__setattr__(self, "mu", float(self.mu))
            object.__setattr__(self, "sigma", float(self.sigma))
            if self.eta is None:
                default = 2.0 if kind is Kind.LOGNORMAL else _TRUNCNORM_DEFAULT_ETA
                object.__setattr__(self, "eta", default)
        object.__setattr__(self, "eta", float(self.eta))
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def is_gamma(self) -> bool:
        return self.kind in (Kind.GAMMA_MIXTURE, Kind.EXPONENTIAL)

    def to_dict(self) -> dict[str, Any]:
        if self.is_gamma:
            return {
                "kind": self.kind.value,
                "alpha": list(self.alpha),
                "beta": list(self.beta),
                "p": list(self.p),
                "eta": self.eta,
            }
        return {"kind": self.kind.value, "mu": self.mu, "sigma": self.sigma, "eta": self.eta}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "JobSizeModel":
        kind = Kind(d["kind"])
        eta = d.get("eta")
        if kind is Kind.EXPONENTIAL:
            beta = d.get("beta", 1.0)
            beta = beta[0] if isinstance(beta, (list, tuple)) else beta
            return exponential(float(beta))
        if kind is Kind.GAMMA_MIXTURE:
            return cls(kind, alpha=tuple(d["alpha"]), beta=tuple(d["beta"]), p=tuple(d["p"]), eta=eta)
        return cls(kind, mu=float(d["mu"]), sigma=float(d["sigma"]), eta=eta)


def gamma_mixture(alpha, beta, p, eta: Optional[float] = None) -> JobSizeModel:
    return JobSizeModel(Kind.GAMMA_MIXTURE, alpha=tuple(alpha), beta=tuple(beta), p=tuple(p), eta=eta)


def exponential(beta: float = 1.0) -> JobSizeModel:
    return JobSizeModel(Kind.EXPONENTIAL, alpha=(1.0,), beta=(float(beta),), p=(1.0,))


def lognormal(mu: float, sigma: float, eta: float = 2.0) -> JobSizeModel:
    return JobSizeModel(Kind.LOGNORMAL, mu=mu, sigma=sigma, eta=eta)


def truncated_normal(mu: float, sigma: float, eta: float = _TRUNCNORM_DEFAULT_ETA) -> JobSizeModel:
    """Law of ``|N(mu, sigma**2)|``."""
    return JobSizeModel(Kind.TRUNCATED_NORMAL, mu=mu, sigma=sigma, eta=eta)


def example1_mixture() -> JobSizeModel:
    """The bimodal three-term gamma mixture used in the figure experiments."""
    return gamma_mixture((2, 6, 1), (3.5, 90, 0.09), (0.6, 0.35, 0.05))


def pdf(model: JobSizeModel, x):
    x = np.asarray(x, dtype=float)
    if model.is_gamma:
        out = np.zeros_like(x)
        for a, b, w in zip(model.alpha, model.beta, model.p):
            out = out + w * stats.gamma.pdf(x, a, scale=1.0 / b)
        return out
    if model.kind is Kind.LOGNORMAL:
        return stats.lognorm.pdf(x, model.sigma, scale=np.exp(model.mu))
    dens = stats.norm.pdf(x, model.mu, model.sigma) + stats.norm.pdf(-x, model.mu, model.sigma)
    return np.where(x >= 0, dens, 0.0)


def _upper_support(model: JobSizeModel) -> float:
    if model.kind is Kind.LOGNORMAL:
        return float(stats.lognorm.isf(_TAIL_PROB, model.sigma, scale=np.exp(model.mu)))
    return float(abs(model.mu) + model.sigma * stats.norm.isf(_TAIL_PROB / 2))


def _quad_transform(model: JobSizeModel, s: float, weight: str) -> float:
    upper = _upper_support(model)
    f = lambda x: float(pdf(model, x))  # noqa: E731
    if weight == "exp":
        val, _ = integrate.quad(lambda x: np.exp(-s * x) * f(x), 0.0, upper,
                                epsabs=_QUAD_EPSABS, epsrel=1e-10, limit=500)
        return val
    if s == 0.0:
        return 1.0 if weight == "cos" else 0.0
    val, _ = integrate.quad(f, 0.0, upper, weight=weight, wvar=s,
                            epsabs=_QUAD_EPSABS, epsrel=1e-10, limit=500)
    return val


def _folded_normal_cf(mu: float, sigma: float, s: np.ndarray) -> np.ndarray:
    """Closed form of ``E exp(i s |X|)``, ``X ~ N(mu, sigma^2)``, via the Faddeeva function.

    Each half-line piece ``exp(i m s - sigma^2 s^2 / 2) Phi(m / sigma + i sigma s)``
    equals ``exp(-m^2 / (2 sigma^2)) w((sigma s - i m / sigma) / sqrt 2) / 2``,
    which avoids the overflow of ``Phi`` at large ``s``.  Non-finite entries
    (extreme ``mu / sigma``) are left for the caller's quadrature fallback.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.zeros(s.shape, dtype=complex)
        for m in (mu, -mu):
            z = (sigma * s - 1j * m / sigma) / math.sqrt(2.0)
            out = out + 0.5 * math.exp(-0.5 * (m / sigma) ** 2) * special.wofz(z)
    return out


def cf(model: JobSizeModel, s):
    """Characteristic function ``E exp(i s B)``; scalar in, scalar out."""
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("s must be finite")
    if model.is_gamma:
        out = np.zeros(s_arr.shape, dtype=complex)
        for a, b, w in zip(model.alpha, model.beta, model.p):
            # principal branch; b - i s stays in the right half-plane
            out = out + w * np.power(b / (b - 1j * s_arr), a)
    else:
        flat = s_arr.ravel()
        vals = np.full(flat.shape, np.nan, dtype=complex)
        if model.kind is Kind.TRUNCATED_NORMAL:
            vals = _folded_normal_cf(model.mu, model.sigma, flat)
        for k in np.flatnonzero(~np.isfinite(vals)):
            sk = flat[k]
            vals[k] = complex(_quad_transform(model, float(sk), "cos"),
                              _quad_transform(model, float(sk), "sin"))
        out = vals.reshape(s_arr.shape)
    out = np.where(s_arr == 0.0, 1.0 + 0.0j, out)
    return out[()] if out.ndim == 0 else out


def lst(model: JobSizeModel, s):
    """Laplace-Stieltjes transform ``E exp(-s B)`` for ``s >= 0``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("lst requires s >= 0")
    if model.is_gamma:
        out = np.zeros(s_arr.shape)
        for a, b, w in zip(model.alpha, model.beta, model.p):
            out = out + w * (b / (b + s_arr)) ** a
    else:
        out = np.array([_quad_transform(model, float(v), "exp") for v in s_arr.ravel()]).reshape(s_arr.shape)
    out = np.where(s_arr == 0.0, 1.0, out)
    return out[()] if out.ndim == 0 else out


def cdf(model: JobSizeModel, x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("cdf is defined for x >= 0 only")
    if model.is_gamma:
        out = np.zeros(x_arr.shape)
        for a, b, w in zip(model.alpha, model.beta, model.p):
            out = out + w * special.gammainc(a, b * x_arr)
        out = np.minimum(out, 1.0)
    elif model.kind is Kind.LOGNORMAL:
        out = stats.lognorm.cdf(x_arr, model.sigma, scale=np.exp(model.mu))
    else:
        out = (stats.norm.cdf((x_arr - model.mu) / model.sigma)
               - stats.norm.cdf((-x_arr - model.mu) / model.sigma))
    return out[()] if np.ndim(out) == 0 else out


def sample(model: JobSizeModel, rng: np.random.Generator, size=None):
    """Draw job sizes from ``model`` using ``rng``."""
    if model.is_gamma:
        if len(model.p) == 1:
            return rng.gamma(model.alpha[0], 1.0 / model.beta[0], size=size)
        comp = rng.choice(len(model.p), size=size, p=np.asarray(model.p))
        alpha = np.asarray(model.alpha)[comp]
        scale = 1.0 / np.asarray(model.beta)[comp]
        return rng.gamma(alpha, scale)
    if model.kind is Kind.LOGNORMAL:
        return rng.lognormal(model.mu, model.sigma, size=size)
    return np.abs(rng.normal(model.mu, model.sigma, size=size))


def _raw_moment(model: JobSizeModel, k: int) -> float:
    if model.is_gamma:
        return float(sum(w * special.poch(a, k) / b**k
                         for a, b, w in zip(model.alpha, model.beta, model.p)))
    if model.kind is Kind.LOGNORMAL:
        return float(np.exp(k * model.mu + 0.5 * k**2 * model.sigma**2))
    val, _ = integrate.quad(lambda x: x**k * float(pdf(model, x)), 0.0, _upper_support(model),
                            epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def mean(model: JobSizeModel) -> float:
    return _raw_moment(model, 1)


def moment3(model: JobSizeModel) -> float:
    return _raw_moment(model, 3)


def smoothness_eta(model: JobSizeModel) -> float:
    return model.eta


def tail_constant(model: JobSizeModel) -> float:
    """A constant ``C0`` with ``|cf(s)| * s**min(alpha) <= C0`` for large ``s``.

    Only defined for gamma mixtures: ``sum(p * beta**alpha) + 1``.
    """
    if not model.is_gamma:
        raise ValueError("tail constant is only available in closed form for gamma mixtures")
    return float(sum(w * b**a for a, b, w in zip(model.alpha, model.beta, model.p)) + 1.0)
