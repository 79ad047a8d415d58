from .tensor import Tensor, as_tensor, concat, gradient, value_and_gradient
from .gaussian import (
    GaussianParams,
    LOG_VAR_BOUND,
    gaussian_loglik,
    jsd_from_noise,
    jsd_mc,
    kl_diag_gaussian,
    kl_standard_normal,
    reparameterize,
)
from .layers import (
    dense,
    dense_init,
    gaussian_head,
    gaussian_head_init,
    glorot_uniform,
    gru_init,
    gru_step,
)
from .adam import AdamState, adam_step

__all__ = [
    "Tensor",
    "as_tensor",
    "concat",
    "gradient",
    "value_and_gradient",
    "GaussianParams",
    "LOG_VAR_BOUND",
    "gaussian_loglik",
    "jsd_from_noise",
    "jsd_mc",
    "kl_diag_gaussian",
    "kl_standard_normal",
    "reparameterize",
    "dense",
    "dense_init",
    "gaussian_head",
    "gaussian_head_init",
    "glorot_uniform",
    "gru_init",
    "gru_step",
    "AdamState",
    "adam_step",
]
