"""Shared recurrent task-dynamics model over paired human motion.

One GRU f_psi plus two Gaussian heads: p(d_t | h_t) summarizes the latent
task state after seeing frames up to x_{t-1}, and p(z_t | d_t) predicts the
frozen window-embedding posterior q(z | x_{t:t+w}). Training minimizes, per
step and partner, KL(p(z|d) || q(z|x_window)) plus a Monte-Carlo JSD that
pulls both partners' d distributions together; d is sampled once per step by
reparameterization so gradients flow through the sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data.ops import apply_normalizer
from .embedding import EmbeddingModel, encode
from .nn import (
    AdamState,
    GaussianParams,
    adam_step,
    gaussian_head,
    gaussian_head_init,
    gru_init,
    gru_step,
    jsd_from_noise,
    jsd_mc,
    kl_diag_gaussian,
    reparameterize,
    value_and_gradient,
)
from .nn.ops import value_of

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DynamicsTrainConfig:
    d_dim: int = 16
    state_dim: int = 128
    head_hidden: tuple = (128,)
    epochs: int = 40
    batch_trials: int = 16
    learning_rate: float = 1e-3
    lr_final_frac: float = 1.0  # linear decay endpoint; 1.0 keeps lr constant
    tbptt: int = 64
    jsd_samples: int = 16
    jsd_weight: float = 1.0
    kl_reversed: bool = False
    seed: int = 0

    def to_dict(self):
        return {**self.__dict__, "head_hidden": list(self.head_hidden)}


@dataclass
class DynamicsModel:
    """GRU state update plus d / z heads, bound to a frozen window embedding."""

    model_kind = "dynamics"

    params: dict
    d_dim: int
    state_dim: int
    embedding: EmbeddingModel
    hidden: tuple = (128,)
    config: dict = field(default_factory=dict)

    def initial_state(self, batch_shape=()):
        return np.zeros(batch_shape + (self.state_dim,))


def init_dynamics_params(rng, frame_dim, latent_dim, config: DynamicsTrainConfig):
    params = {}
    params.update(gru_init(rng, frame_dim, config.state_dim, "gru"))
    params.update(gaussian_head_init(rng, config.state_dim, config.head_hidden, config.d_dim, "dhead"))
    params.update(gaussian_head_init(rng, config.d_dim, config.head_hidden, latent_dim, "zhead"))
    return params


def advance(model, h, x_prev):
    """One recurrent step: h' = f(h, x_prev), then p(d | h')."""
    h_next = gru_step(model.params, "gru", h, x_prev)
    d_dist = gaussian_head(model.params, "dhead", h_next, len(model.hidden))
    return h_next, d_dist


def latent_from_dynamics(model, d):
    """Predicted window-embedding posterior p(z | d)."""
    return gaussian_head(model.params, "zhead", d, len(model.hidden))


def extract_dynamics_means(model, frames):
    """Mean task-state trajectory for one normalized stream.

    Row t is the mean of p(d | h) after the GRU has consumed frames[0..t];
    output has exactly len(frames) rows.
    """
    frames = np.asarray(frames, dtype=np.float64)
    h = model.initial_state()
    out = np.empty((frames.shape[0], model.d_dim))
    for t in range(frames.shape[0]):
        h, d_dist = advance(model, h, frames[t])
        out[t] = d_dist.mean
    return out


def _window_targets(embedding, frames):
    """Frozen encoder posteriors for window starts 1..T-w (numpy, no tape)."""
    w = embedding.window_spec.w
    T, dims = frames.shape
    flat = np.lib.stride_tricks.sliding_window_view(frames, (w, dims)).reshape(T - w + 1, w * dims)
    post = encode(embedding, flat[1:])
    return post.mean, post.log_var


def _usable_trials(trials, min_frames):
    kept = []
    for trial in trials:
        if trial.a1.frames.shape[0] < min_frames:
            log.warning(
                "skipping trial %s: %d frames < w+1 = %d",
                trial.trial_id,
                trial.a1.frames.shape[0],
                min_frames,
            )
            continue
        kept.append(trial)
    return kept


def _pack_batch(prepared, idx, latent_dim):
    """Stack a1 chains then a2 chains; partner of row i is row i + B."""
    batch = [prepared[i] for i in idx]
    B = len(batch)
    t_cap = max(item["frames"][0].shape[0] for item in batch)
    dims = batch[0]["frames"][0].shape[1]
    X = np.zeros((t_cap, 2 * B, dims))
    tm = np.zeros((t_cap + 1, 2 * B, latent_dim))
    tlv = np.zeros((t_cap + 1, 2 * B, latent_dim))
    mask = np.zeros((t_cap + 1, B))
    for i, item in enumerate(batch):
        for side in (0, 1):
            frames = item["frames"][side]
            T = frames.shape[0]
            col = i + side * B
            X[:T, col] = frames
            mean, log_var = item["targets"][side]
            tm[1 : 1 + mean.shape[0], col] = mean
            tlv[1 : 1 + mean.shape[0], col] = log_var
        mask[1 : 1 + item["targets"][0][0].shape[0], i] = 1.0
    return X, tm, tlv, mask


def dynamics_chunk_loss(p, h0, X, tm, tlv, mask, eps_d, eps_j, t0, t1, B, cell, n_hid, kl_reversed, jsd_weight):
    """Truncated-BPTT chunk objective over both partner chains.

    Rows 0..B-1 of the stacked state are partner 1, rows B..2B-1 partner 2;
    both run through the same parameters. Per valid step: KL between the
    predicted latent p(z|d) and the frozen encoder target (both partners)
    plus the JSD between the two d distributions, normalized by the valid
    (trial, step) count in cell["denom"]. cell receives the detached final
    state and the separate KL / JSD sums.
    """
    h = h0
    total = None
    kl_sum_v = 0.0
    jsd_sum_v = 0.0
    mask2 = np.concatenate([mask, mask], axis=1)
    for t in range(t0, t1):
        h = gru_step(p, "gru", h, X[t - 1])
        d_dist = gaussian_head(p, "dhead", h, n_hid)
        d = reparameterize(d_dist, eps_d[t - t0])
        z_dist = gaussian_head(p, "zhead", d, n_hid)
        target = GaussianParams(tm[t], tlv[t])
        if kl_reversed:
            kl = kl_diag_gaussian(target, z_dist)
        else:
            kl = kl_diag_gaussian(z_dist, target)
        d_a = GaussianParams(d_dist.mean[:B], d_dist.log_var[:B])
        d_b = GaussianParams(d_dist.mean[B:], d_dist.log_var[B:])
        jsd = jsd_from_noise(d_a, d_b, eps_j[t - t0])
        step = (kl * mask2[t]).sum() + jsd_weight * (jsd * mask[t]).sum()
        total = step if total is None else total + step
        kl_sum_v += float((value_of(kl) * mask2[t]).sum())
        jsd_sum_v += float((value_of(jsd) * mask[t]).sum())
    cell["h"] = value_of(h)
    cell["kl"] = kl_sum_v
    cell["jsd"] = jsd_sum_v
    return total / cell["denom"]


def train_dynamics(trials, embedding: EmbeddingModel, config: DynamicsTrainConfig):
    """Fit the shared dynamics model on paired trials.

    Both partners' chains share every parameter. Truncated BPTT: gradients
    flow within chunks of config.tbptt steps; the recurrent state crosses
    chunk boundaries as a constant. Returns (model, trace) with per-epoch
    mean loss plus separate KL / JSD terms.
    """
    w = embedding.window_spec.w
    trials = _usable_trials(trials, w + 1)
    if not trials:
        raise ValueError("no trial is long enough to train on")
    norm = embedding.normalizer
    latent_dim = embedding.latent_dim
    prepared = []
    for trial in trials:
        sides = []
        targets = []
        for stream in (trial.a1, trial.a2):
            frames = apply_normalizer(norm, stream.frames)
            sides.append(frames)
            targets.append(_window_targets(embedding, frames))
        prepared.append({"frames": sides, "targets": targets})

    frame_dim = prepared[0]["frames"][0].shape[1]
    rng = np.random.default_rng(config.seed)
    params = init_dynamics_params(rng, frame_dim, latent_dim, config)
    opt = AdamState.init(params, learning_rate=config.learning_rate)

    trace = {"epoch_mean_loss": [], "epoch_mean_kl": [], "epoch_mean_jsd": []}
    n = len(prepared)
    for epoch in range(config.epochs):
        # linear lr decay stabilizes the far-horizon rollout quality across seeds
        frac = epoch / max(config.epochs - 1, 1)
        opt.learning_rate = config.learning_rate * (1.0 - (1.0 - config.lr_final_frac) * frac)
        order = rng.permutation(n)
        loss_acc = kl_acc = jsd_acc = denom_acc = 0.0
        for b0 in range(0, n, config.batch_trials):
            idx = order[b0 : b0 + config.batch_trials]
            X, tm, tlv, mask = _pack_batch(prepared, idx, latent_dim)
            B = len(idx)
            h = np.zeros((2 * B, config.state_dim))
            t_end = mask.shape[0]
            for c0 in range(1, t_end, config.tbptt):
                c1 = min(c0 + config.tbptt, t_end)
                denom = float(mask[c0:c1].sum())
                if denom == 0.0:
                    break
                steps = c1 - c0
                eps_d = rng.standard_normal((steps, 2 * B, config.d_dim))
                eps_j = rng.standard_normal((steps, config.jsd_samples, B, config.d_dim))
                cell = {"denom": denom}
                try:
                    loss, grads = value_and_gradient(
                        dynamics_chunk_loss,
                        params,
                        h,
                        X,
                        tm,
                        tlv,
                        mask,
                        eps_d,
                        eps_j,
                        c0,
                        c1,
                        B,
                        cell,
                        len(config.head_hidden),
                        config.kl_reversed,
                        config.jsd_weight,
                    )
                except FloatingPointError as exc:
                    raise FloatingPointError(
                        f"non-finite dynamics loss at epoch {epoch}, chunk starting t={c0}: {exc}"
                    ) from exc
                params, opt = adam_step(opt, params, grads)
                h = cell["h"]
                loss_acc += loss * denom
                kl_acc += cell["kl"]
                jsd_acc += cell["jsd"]
                denom_acc += denom
        trace["epoch_mean_loss"].append(loss_acc / denom_acc)
        trace["epoch_mean_kl"].append(kl_acc / (2.0 * denom_acc))
        trace["epoch_mean_jsd"].append(jsd_acc / denom_acc)
        log.debug("dynamics epoch %d loss %.4f", epoch, trace["epoch_mean_loss"][-1])

    model = DynamicsModel(
        params=params,
        d_dim=config.d_dim,
        state_dim=config.state_dim,
        embedding=embedding,
        hidden=tuple(config.head_hidden),
        config=config.to_dict(),
    )
    return model, trace


def evaluate_dynamics(model, trials, jsd_samples=1024, seed=0):
    """Mean per-step KL and Monte-Carlo JSD over trials (no training noise)."""
    w = model.embedding.window_spec.w
    norm = model.embedding.normalizer
    rng = np.random.default_rng(seed)
    kl_total = jsd_total = 0.0
    kl_count = jsd_count = 0
    for trial in trials:
        frames = [apply_normalizer(norm, s.frames) for s in (trial.a1, trial.a2)]
        T = frames[0].shape[0]
        if T < w + 1:
            continue
        targets = [_window_targets(model.embedding, f) for f in frames]
        states = [model.initial_state(), model.initial_state()]
        for t in range(1, T - w + 1):
            dists = []
            for side in (0, 1):
                states[side], d_dist = advance(model, states[side], frames[side][t - 1])
                z_dist = latent_from_dynamics(model, d_dist.mean)
                tm, tlv = targets[side]
                target = GaussianParams(tm[t - 1], tlv[t - 1])
                kl_total += float(kl_diag_gaussian(z_dist, target))
                kl_count += 1
                dists.append(d_dist)
            jsd_total += float(jsd_mc(dists[0], dists[1], num_samples=jsd_samples, seed=rng))
            jsd_count += 1
    if kl_count == 0:
        raise ValueError("no usable trials to evaluate")
    return {"kl": kl_total / kl_count, "jsd": jsd_total / jsd_count}
