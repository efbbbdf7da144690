"""Exact information measures, identity checks and capacity bounds for finite channels with noisy feedback."""

__version__ = "0.1.0"

from ._accel import BACKEND, HAVE_NUMBA
from .core import (
    InvalidSystem,
    JointTable,
    Kernel,
    MessageEncoder,
    additive_feedback,
    bsc,
    build_joint_wxyz,
    build_joint_xyz,
    dmc,
    identity_channel,
    induced_policy,
    iid_noise,
    iid_policy,
    marginal,
    perfect_feedback,
)
from .measures import (
    InfoQuery,
    causal_conditional_directed_information,
    conditional_directed_information,
    density,
    directed_information,
    entropy,
    finite_n_density_quantiles,
    mutual_information,
    residual_directed_information,
)
