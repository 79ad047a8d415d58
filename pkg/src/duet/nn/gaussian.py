"""Diagonal Gaussian distributions shared by every model head.

All functions operate on either autodiff Tensors (training) or plain numpy
arrays (inference); the math is written once against the common operator
surface. Distribution parameters live in a (mean, log_var) pair and every
reduction runs over the trailing dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops

LOG_VAR_BOUND = 10.0
_LOG_2PI = math.log(2.0 * math.pi)
_LN_2 = math.log(2.0)


@dataclass
class GaussianParams:
    """Mean and log-variance of a diagonal Gaussian over the last axis."""

    mean: object
    log_var: object

    @classmethod
    def of(cls, mean, log_var):
        """Build with log-variance clamped to a numerically safe band."""
        return cls(mean, ops.clip(log_var, -LOG_VAR_BOUND, LOG_VAR_BOUND))

    @property
    def dim(self):
        return ops.value_of(self.mean).shape[-1]

    def detach(self):
        """Copy out plain numpy parameters, severing any autodiff tape."""
        return GaussianParams(ops.value_of(self.mean).copy(), ops.value_of(self.log_var).copy())


def reparameterize(params, eps):
    """Draw mean + std * eps; eps carries any leading sample axes."""
    std = ops.exp(0.5 * params.log_var)
    return params.mean + std * eps


def gaussian_loglik(x, params):
    """Log density of `x` under the diagonal Gaussian, summed over last axis."""
    diff = x - params.mean
    quad = diff * diff * ops.exp(-params.log_var)
    return -0.5 * ops.sum_last(quad + params.log_var + _LOG_2PI)


def kl_standard_normal(params):
    """KL(params || N(0, I)), summed over the last axis."""
    var = ops.exp(params.log_var)
    return 0.5 * ops.sum_last(var + params.mean * params.mean - 1.0 - params.log_var)


def kl_diag_gaussian(p, q):
    """KL(p || q): expectation under the first argument, summed over last axis."""
    var_p = ops.exp(p.log_var)
    inv_var_q = ops.exp(-q.log_var)
    diff = p.mean - q.mean
    term = q.log_var - p.log_var + (var_p + diff * diff) * inv_var_q - 1.0
    return 0.5 * ops.sum_last(term)


def jsd_from_noise(p, q, eps):
    """Monte-Carlo Jensen-Shannon divergence between diagonal Gaussians.

    JSD = (KL(p||m) + KL(q||m)) / 2 with m the equal mixture. One shared
    eps block (sample axis leading) reparameterizes both distributions, so
    the estimate is symmetric in (p, q) by construction and each sample term
    is bounded by ln 2.
    """
    z_p = reparameterize(p, eps)
    z_q = reparameterize(q, eps)
    lp_p = gaussian_loglik(z_p, p)
    lq_p = gaussian_loglik(z_p, q)
    lp_q = gaussian_loglik(z_q, p)
    lq_q = gaussian_loglik(z_q, q)
    log_m_p = ops.logaddexp(lp_p, lq_p) - _LN_2
    log_m_q = ops.logaddexp(lp_q, lq_q) - _LN_2
    kl_pm = ops.mean_axis0(lp_p - log_m_p)
    kl_qm = ops.mean_axis0(lq_q - log_m_q)
    return 0.5 * (kl_pm + kl_qm)


def jsd_mc(p, q, num_samples=1024, seed=0):
    """Seeded Monte-Carlo JSD; deterministic given (num_samples, seed)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eps = rng.standard_normal((num_samples,) + ops.value_of(p.mean).shape)
    return jsd_from_noise(p, q, eps)
