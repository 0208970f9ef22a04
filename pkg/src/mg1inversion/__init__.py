"""Nonparametric job-size CDF estimation from Poisson-probed M/G/1 workload."""

__version__ = "0.1.0"

from .dist_catalog import JobSizeModel, Kind  # noqa: E402
from .errors import ConfigError, NumericError  # noqa: E402
from .mg1_sim import WorkloadSample, simulate  # noqa: E402
from .cf_estim import CfEstimate, cf_on_grid, estimate_gamma_eps  # noqa: E402
from .cdf_invert import CdfEstimate, choose_truncation, estimate_cdf, invert_on_grid  # noqa: E402
from .joint_lambda import JointEstimate, estimate_joint  # noqa: E402

__all__ = [
    "JobSizeModel",
    "Kind",
    "ConfigError",
    "NumericError",
    "WorkloadSample",
    "simulate",
    "CfEstimate",
    "cf_on_grid",
    "estimate_gamma_eps",
    "CdfEstimate",
    "choose_truncation",
    "estimate_cdf",
    "invert_on_grid",
    "JointEstimate",
    "estimate_joint",
]
