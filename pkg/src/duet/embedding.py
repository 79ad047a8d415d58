"""Windowed motion variational autoencoder.

Encoder q(z | x_{t:t+w}) and decoder p(x_{t:t+w} | z) are Gaussian heads over
flat normalized windows; the prior is N(0, I). One shared human model covers
both interaction partners; a separate model embeds robot windows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data.types import Normalizer, WindowSpec
from .nn import (
    AdamState,
    adam_step,
    gaussian_head,
    gaussian_head_init,
    gaussian_loglik,
    kl_standard_normal,
    reparameterize,
    value_and_gradient,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingTrainConfig:
    latent_dim: int = 32
    hidden: tuple = (256, 256)
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 1e-3
    kl_warmup_epochs: int = 0
    seed: int = 0

    def to_dict(self):
        return {**self.__dict__, "hidden": list(self.hidden)}


@dataclass
class EmbeddingModel:
    """Trained window VAE plus the preprocessing it expects."""

    model_kind = "embedding"

    params: dict
    latent_dim: int
    window_spec: WindowSpec
    normalizer: Optional[Normalizer]
    agent_kind: str
    hidden: tuple = (256, 256)
    config: dict = field(default_factory=dict)

    @property
    def window_dim(self):
        return self.params["dec.mean.W"].shape[0]


def _check_window(model, window):
    window = np.asarray(window) if not hasattr(window, "value") else window
    dim = window.shape[-1] if hasattr(window, "shape") else np.asarray(window).shape[-1]
    if dim != model.window_dim:
        raise ValueError(f"window dim {dim} != model window dim {model.window_dim}")


def encode(model, window):
    """Posterior Gaussian over z for a flat normalized window (or batch)."""
    _check_window(model, window)
    return gaussian_head(model.params, "enc", window, len(model.hidden))


def decode(model, z):
    """Gaussian over the flat window for latent z (or batch)."""
    return gaussian_head(model.params, "dec", z, len(model.hidden))


def _elbo_parts(params, window, noise, n_hidden):
    """Single-sample ELBO pieces; works on Tensors and ndarrays alike."""
    posterior = gaussian_head(params, "enc", window, n_hidden)
    z = reparameterize(posterior, noise)
    likelihood = gaussian_loglik(window, gaussian_head(params, "dec", z, n_hidden))
    kl = kl_standard_normal(posterior)
    return likelihood, kl


def elbo(model, window, noise):
    """Evidence lower bound loglik - kl with one reparameterized sample."""
    _check_window(model, window)
    lik, kl = _elbo_parts(model.params, np.asarray(window, dtype=np.float64), noise, len(model.hidden))
    return float(lik - kl), {"loglik": float(lik), "kl": float(kl)}


def init_embedding_params(rng, window_dim, latent_dim, hidden):
    params = {}
    params.update(gaussian_head_init(rng, window_dim, hidden, latent_dim, "enc"))
    params.update(gaussian_head_init(rng, latent_dim, tuple(reversed(hidden)), window_dim, "dec"))
    return params


def train_embedding(windows, config: EmbeddingTrainConfig, window_spec, normalizer, agent_kind):
    """Minibatch Adam on -ELBO over normalized flat windows.

    Returns (model, trace) where trace["epoch_mean_loss"] is the per-epoch
    mean of -ELBO. Deterministic given config.seed.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2 or windows.shape[0] < 1:
        raise ValueError("need a non-empty (N, w*dims) window matrix")
    n, window_dim = windows.shape
    rng = np.random.default_rng(config.seed)
    params = init_embedding_params(rng, window_dim, config.latent_dim, config.hidden)
    opt = AdamState.init(params, learning_rate=config.learning_rate)
    n_hidden = len(config.hidden)

    def loss_fn(p, batch, noise, kl_weight):
        lik, kl = _elbo_parts(p, batch, noise, n_hidden)
        return (kl * kl_weight - lik).mean()

    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        if config.kl_warmup_epochs > 0:
            kl_weight = min(1.0, (epoch + 1) / config.kl_warmup_epochs)
        else:
            kl_weight = 1.0
        total, count = 0.0, 0
        for start in range(0, n, config.batch_size):
            batch = windows[order[start : start + config.batch_size]]
            noise = rng.standard_normal((batch.shape[0], config.latent_dim))
            try:
                loss, grads = value_and_gradient(loss_fn, params, batch, noise, kl_weight)
            except FloatingPointError as exc:
                raise FloatingPointError(
                    f"non-finite embedding loss at epoch {epoch}, batch offset {start}: {exc}"
                ) from exc
            total += loss * batch.shape[0]
            count += batch.shape[0]
            params, opt = adam_step(opt, params, grads)
        trace.append(total / count)
        log.debug("embedding epoch %d mean loss %.4f", epoch, trace[-1])

    model = EmbeddingModel(
        params=params,
        latent_dim=config.latent_dim,
        window_spec=window_spec,
        normalizer=normalizer,
        agent_kind=agent_kind,
        hidden=tuple(config.hidden),
        config=config.to_dict(),
    )
    return model, {"epoch_mean_loss": trace}
