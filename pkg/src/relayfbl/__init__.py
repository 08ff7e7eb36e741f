"""Finite-blocklength bounds and decode-forward simulation for the Gaussian degraded relay channel."""
from ._kernels import BACKEND
from .core import ChannelParams, GaussianSpec, RngStream, cap_fn, disp_fn, log_gauss
from .capacity import CapacityResult, PowerSplit, alpha_tilde, eps_capacity, r_cutset

__version__ = "0.1.0"
