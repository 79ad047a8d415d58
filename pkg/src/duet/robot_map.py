"""Embodiment mapping: robot-side recurrence conditioned on task state.

A GRU consumes [x^r_{t-1}, d_{t-1}] rows (robot frame plus the dynamics-model
task-state mean extracted from the human partner) and a Gaussian head predicts
the frozen robot window embedding q(z^r | x^r_{t:t+w}). Raw variants swap the
conditioning: "raw_hr" feeds the human frame instead of d, "raw_r" feeds the
robot frame alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data.ops import apply_normalizer
from .dynamics import DynamicsModel, _usable_trials, extract_dynamics_means, _window_targets
from .embedding import EmbeddingModel
from .nn import (
    AdamState,
    GaussianParams,
    adam_step,
    gaussian_head,
    gaussian_head_init,
    gru_init,
    gru_step,
    kl_diag_gaussian,
    value_and_gradient,
)
from .nn.ops import value_of

log = logging.getLogger(__name__)

VARIANTS = ("hme", "raw_hr", "raw_r")


@dataclass(frozen=True)
class RobotTrainConfig:
    state_dim: int = 128
    head_hidden: tuple = (128,)
    epochs: int = 40
    batch_trials: int = 16
    learning_rate: float = 1e-3
    tbptt: int = 64
    kl_reversed: bool = False
    seed: int = 0

    def to_dict(self):
        return {**self.__dict__, "head_hidden": list(self.head_hidden)}


@dataclass
class RobotInteractionModel:
    """Robot-side recurrence over conditioned rows, bound to frozen parents."""

    model_kind = "robot_map"

    params: dict
    variant: str
    state_dim: int
    robot_embedding: EmbeddingModel
    dynamics: Optional[DynamicsModel]
    hidden: tuple = (128,)
    config: dict = field(default_factory=dict)
    human_normalizer: object = None

    def initial_state(self, batch_shape=()):
        return np.zeros(batch_shape + (self.state_dim,))


def robot_advance(model, h, x_r_prev, aux_prev=None):
    """One robot step on row [x^r, aux]; returns (h', p(z^r | h'))."""
    if aux_prev is None:
        row = np.asarray(x_r_prev, dtype=np.float64)
    else:
        row = np.concatenate([np.asarray(x_r_prev, dtype=np.float64), np.asarray(aux_prev, dtype=np.float64)], axis=-1)
    h_next = gru_step(model.params, "gru", h, row)
    z_dist = gaussian_head(model.params, "zrhead", h_next, len(model.hidden))
    return h_next, z_dist


def _human_normalizer(cond):
    return cond.embedding.normalizer if isinstance(cond, DynamicsModel) else cond


def _aux_frames(variant, cond, human_frames_raw):
    """Per-frame conditioning stream in model input space (may be empty).

    `cond` is the dynamics model for "hme"; "raw_hr" accepts either the
    dynamics model or a bare human Normalizer; "raw_r" ignores it.
    """
    if variant == "raw_r":
        return np.zeros((human_frames_raw.shape[0], 0))
    human_norm = apply_normalizer(_human_normalizer(cond), human_frames_raw)
    if variant == "raw_hr":
        return human_norm
    return extract_dynamics_means(cond, human_norm)


def _check_hri_trial(trial):
    if trial.a1.agent_kind != "human" or trial.a2.agent_kind != "robot":
        raise ValueError(
            f"trial {trial.trial_id}: expected human a1 / robot a2, got {trial.a1.agent_kind}/{trial.a2.agent_kind}"
        )


def robot_chunk_loss(p, h0, X, tm, tlv, mask, t0, t1, cell, n_hid, kl_reversed):
    """Truncated-BPTT chunk objective: KL to the frozen robot window target.

    Consuming row t-1 predicts the window starting at t; invalid padded steps
    are masked out and the sum is normalized by cell["denom"].
    """
    h = h0
    total = None
    for t in range(t0, t1):
        h = gru_step(p, "gru", h, X[t - 1])
        z_dist = gaussian_head(p, "zrhead", h, n_hid)
        target = GaussianParams(tm[t], tlv[t])
        if kl_reversed:
            kl = kl_diag_gaussian(target, z_dist)
        else:
            kl = kl_diag_gaussian(z_dist, target)
        step = (kl * mask[t]).sum()
        total = step if total is None else total + step
    cell["h"] = value_of(h)
    return total / cell["denom"]


def train_robot_mapping(trials, robot_embedding: EmbeddingModel, dynamics, config: RobotTrainConfig, variant="hme"):
    """Fit the robot recurrence on paired human-robot trials.

    Consumes exactly sum(T - w) rows per epoch across usable trials; row i
    pairs input [x^r_i, aux_i] with the frozen posterior of the robot window
    starting at i+1. Returns (model, trace) with trace["rows_consumed"].
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if variant == "hme" and not isinstance(dynamics, DynamicsModel):
        raise ValueError("variant 'hme' needs the trained dynamics model")
    if variant == "raw_hr" and dynamics is None:
        raise ValueError("variant 'raw_hr' needs a human normalizer or dynamics model")
    w = robot_embedding.window_spec.w
    trials = _usable_trials(trials, w + 1)
    if not trials:
        raise ValueError("no trial is long enough to train on")
    latent_dim = robot_embedding.latent_dim

    prepared = []
    rows_consumed = 0
    for trial in trials:
        _check_hri_trial(trial)
        robot_norm = apply_normalizer(robot_embedding.normalizer, trial.a2.frames)
        aux = _aux_frames(variant, dynamics, trial.a1.frames)
        rows = np.concatenate([robot_norm, aux], axis=1)
        tm, tlv = _window_targets(robot_embedding, robot_norm)
        prepared.append({"rows": rows, "tm": tm, "tlv": tlv})
        rows_consumed += rows.shape[0] - w

    in_dim = prepared[0]["rows"].shape[1]
    rng = np.random.default_rng(config.seed)
    params = {}
    params.update(gru_init(rng, in_dim, config.state_dim, "gru"))
    params.update(gaussian_head_init(rng, config.state_dim, config.head_hidden, latent_dim, "zrhead"))
    opt = AdamState.init(params, learning_rate=config.learning_rate)

    trace = {"epoch_mean_loss": [], "rows_consumed": rows_consumed}
    n = len(prepared)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_acc = denom_acc = 0.0
        for b0 in range(0, n, config.batch_trials):
            idx = order[b0 : b0 + config.batch_trials]
            batch = [prepared[i] for i in idx]
            B = len(batch)
            t_cap = max(item["rows"].shape[0] for item in batch)
            X = np.zeros((t_cap, B, in_dim))
            tm = np.zeros((t_cap + 1, B, latent_dim))
            tlv = np.zeros((t_cap + 1, B, latent_dim))
            mask = np.zeros((t_cap + 1, B))
            for i, item in enumerate(batch):
                T = item["rows"].shape[0]
                X[:T, i] = item["rows"]
                n_t = item["tm"].shape[0]
                tm[1 : 1 + n_t, i] = item["tm"]
                tlv[1 : 1 + n_t, i] = item["tlv"]
                mask[1 : 1 + n_t, i] = 1.0
            h = np.zeros((B, config.state_dim))
            t_end = mask.shape[0]
            for c0 in range(1, t_end, config.tbptt):
                c1 = min(c0 + config.tbptt, t_end)
                denom = float(mask[c0:c1].sum())
                if denom == 0.0:
                    break
                cell = {"denom": denom}
                try:
                    loss, grads = value_and_gradient(
                        robot_chunk_loss, params, h, X, tm, tlv, mask, c0, c1, cell,
                        len(config.head_hidden), config.kl_reversed,
                    )
                except FloatingPointError as exc:
                    raise FloatingPointError(
                        f"non-finite robot-mapping loss at epoch {epoch}, chunk starting t={c0}: {exc}"
                    ) from exc
                params, opt = adam_step(opt, params, grads)
                h = cell["h"]
                loss_acc += loss * denom
                denom_acc += denom
        trace["epoch_mean_loss"].append(loss_acc / denom_acc)
        log.debug("robot %s epoch %d loss %.4f", variant, epoch, trace["epoch_mean_loss"][-1])

    model = RobotInteractionModel(
        params=params,
        variant=variant,
        state_dim=config.state_dim,
        robot_embedding=robot_embedding,
        dynamics=dynamics if variant == "hme" else None,
        hidden=tuple(config.head_hidden),
        config={**config.to_dict(), "variant": variant},
        human_normalizer=None if variant == "raw_r" else _human_normalizer(dynamics),
    )
    return model, trace
