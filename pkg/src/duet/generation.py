"""Rollout and online prediction on top of the trained models.

Every path advances one frame at a time through the same single-tick update,
so feeding a recording incrementally reproduces batch rollouts bit for bit.
Per tick the dynamics GRU consumes the human frame (observed or its own
prediction), the robot GRU consumes [robot frame, conditioning], and decoded
mean windows are refreshed on demand: predictions between refreshes come from
the last decoded window, which is how the system replans at a coarser rate
than it streams.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data.ops import apply_normalizer, invert_normalizer
from .dynamics import DynamicsModel, advance, latent_from_dynamics
from .embedding import decode
from .nn import gaussian_head
from .robot_map import RobotInteractionModel, robot_advance

ROBOT_LIMIT = np.pi


@dataclass(frozen=True)
class RolloutState:
    """Everything the single-tick update carries between frames."""

    h_s: Optional[np.ndarray]  # dynamics GRU state (None for raw_r)
    h_r: np.ndarray  # robot GRU state
    last_human_norm: Optional[np.ndarray]
    last_robot_norm: np.ndarray
    human_window: Optional[np.ndarray]  # (w, human_dims) normalized, decoded
    robot_window: Optional[np.ndarray]  # (w, 7) normalized, decoded
    cursor: int
    t: int  # frames consumed so far


def _decode_human_window(dynamics, h_s):
    """Mean human window for the current dynamics state (normalized)."""
    d_mean = gaussian_head(dynamics.params, "dhead", h_s, len(dynamics.hidden)).mean
    z = latent_from_dynamics(dynamics, d_mean).mean
    w = dynamics.embedding.window_spec.w
    return decode(dynamics.embedding, z).mean.reshape(w, -1)


def _decode_robot_window(model, h_r):
    z = gaussian_head(model.params, "zrhead", h_r, len(model.hidden)).mean
    w = model.robot_embedding.window_spec.w
    return decode(model.robot_embedding, z).mean.reshape(w, -1)


def init_state(model: RobotInteractionModel, initial_robot_frame):
    """Fresh state before any frame; the robot starts at a known pose."""
    robot_norm = apply_normalizer(model.robot_embedding.normalizer, np.asarray(initial_robot_frame, dtype=np.float64))
    h_s = None if model.variant == "raw_r" else (
        model.dynamics.initial_state() if model.variant == "hme" else None
    )
    return RolloutState(
        h_s=h_s,
        h_r=model.initial_state(),
        last_human_norm=None,
        last_robot_norm=robot_norm,
        human_window=None,
        robot_window=None,
        cursor=0,
        t=0,
    )


def _tick(state: RolloutState, model: RobotInteractionModel, human_norm, robot_norm, do_refresh):
    """Advance one frame. Inputs are normalized or None (= use prediction)."""
    if human_norm is None:
        if model.variant == "hme" and state.human_window is not None:
            human_norm = state.human_window[state.cursor]
        else:
            human_norm = state.last_human_norm  # stale pose for raw_hr
    if robot_norm is None:
        robot_norm = state.robot_window[state.cursor] if state.robot_window is not None else state.last_robot_norm

    h_s = state.h_s
    aux = None
    if model.variant == "hme":
        h_s, d_dist = advance(model.dynamics, state.h_s, human_norm)
        aux = d_dist.mean
    elif model.variant == "raw_hr":
        aux = human_norm
    h_r, _ = robot_advance(model, state.h_r, robot_norm, aux)

    t = state.t + 1
    human_window, robot_window, cursor = state.human_window, state.robot_window, state.cursor + 1
    if do_refresh or robot_window is None or cursor >= robot_window.shape[0]:
        robot_window = _decode_robot_window(model, h_r)
        if model.variant == "hme":
            human_window = _decode_human_window(model.dynamics, h_s)
        cursor = 0
    return replace(
        state,
        h_s=h_s,
        h_r=h_r,
        last_human_norm=human_norm,
        last_robot_norm=robot_norm,
        human_window=human_window,
        robot_window=robot_window,
        cursor=cursor,
        t=t,
    )


def _emit_robot(model, state):
    """Raw robot command for tick state.t, clamped to joint limits."""
    raw = invert_normalizer(model.robot_embedding.normalizer, state.robot_window[state.cursor])
    return np.clip(raw, -ROBOT_LIMIT, ROBOT_LIMIT)


def online_step(state, model, human_frame, robot_frame=None, refresh_every=4, force_refresh=False):
    """Consume one observed human frame; return the next robot command.

    The robot input for this tick is the observed robot_frame when given,
    otherwise the command emitted last call. Windows are re-decoded every
    refresh_every ticks (and whenever exhausted); between refreshes commands
    stream from the last decoded window. Returns
    (state', robot_command (7,), robot_window (w,7), human_window or None),
    all raw denormalized; the command is clamped to +-pi.
    """
    human_frame = np.asarray(human_frame, dtype=np.float64)
    if human_frame.ndim != 1 or not np.all(np.isfinite(human_frame)):
        raise ValueError("human frame must be a finite 1-D vector")
    if model.variant == "raw_r":
        human_norm = None
    else:
        human_norm = apply_normalizer(model.human_normalizer, human_frame)
    robot_norm = None
    if robot_frame is not None:
        robot_frame = np.asarray(robot_frame, dtype=np.float64)
        if not np.all(np.isfinite(robot_frame)):
            raise ValueError("robot frame must be finite")
        robot_norm = apply_normalizer(model.robot_embedding.normalizer, robot_frame)
    do_refresh = force_refresh or state.robot_window is None or (state.t + 1) % refresh_every == 0
    state = _tick(state, model, human_norm, robot_norm, do_refresh)
    command = _emit_robot(model, state)
    robot_window = invert_normalizer(model.robot_embedding.normalizer, state.robot_window)
    human_window = None
    if state.human_window is not None and model.variant == "hme":
        human_window = invert_normalizer(model.dynamics.embedding.normalizer, state.human_window)
    return state, command, robot_window, human_window


def rollout_human(dynamics: DynamicsModel, observed_prefix, horizon, refresh_every=None):
    """Predict `horizon` human frames after an observed raw prefix.

    Decodes the mean window at the prefix end, feeds predictions back as
    input, and re-decodes every refresh_every consumed predictions
    (default: a full window). Returns raw frames (horizon, dims).
    """
    norm = dynamics.embedding.normalizer
    w = dynamics.embedding.window_spec.w
    refresh_every = w if refresh_every is None else refresh_every
    prefix = apply_normalizer(norm, np.asarray(observed_prefix, dtype=np.float64))
    if prefix.ndim != 2 or prefix.shape[0] < 1:
        raise ValueError("need a non-empty observed prefix")
    h = dynamics.initial_state()
    for frame in prefix:
        h, _ = advance(dynamics, h, frame)
    out = []
    window = _decode_human_window(dynamics, h)
    cursor = 0
    while len(out) < horizon:
        if cursor >= min(refresh_every, w):
            window = _decode_human_window(dynamics, h)
            cursor = 0
        frame = window[cursor]
        out.append(frame)
        h, _ = advance(dynamics, h, frame)
        cursor += 1
    return invert_normalizer(norm, np.asarray(out))


def rollout_robot(model: RobotInteractionModel, human_prefix, robot_prefix, horizon, refresh_every=None):
    """Predict `horizon` raw robot frames after aligned raw prefixes.

    During the prefix both streams are observed; beyond it the human side
    runs on its own predictions ("hme"), on the stale last observed pose
    ("raw_hr"), or not at all ("raw_r"), and the robot side consumes its own
    decoded predictions. Outputs are clamped to +-pi.
    """
    human_prefix = np.asarray(human_prefix, dtype=np.float64)
    robot_prefix = np.asarray(robot_prefix, dtype=np.float64)
    if robot_prefix.ndim != 2 or robot_prefix.shape[0] < 1:
        raise ValueError("need a non-empty robot prefix")
    if model.variant != "raw_r" and human_prefix.shape[0] != robot_prefix.shape[0]:
        raise ValueError("human and robot prefixes must have equal length")
    w = model.robot_embedding.window_spec.w
    refresh_every = w if refresh_every is None else refresh_every
    robot_norm_prefix = apply_normalizer(model.robot_embedding.normalizer, robot_prefix)
    human_norm_prefix = None
    if model.variant != "raw_r":
        human_norm_prefix = apply_normalizer(model.human_normalizer, human_prefix)

    state = init_state(model, robot_prefix[0])
    p = robot_prefix.shape[0]
    for i in range(p):
        human_norm = None if human_norm_prefix is None else human_norm_prefix[i]
        state = _tick(state, model, human_norm, robot_norm_prefix[i], do_refresh=(i == p - 1))
    out = []
    emitted = 0
    while emitted < horizon:
        out.append(_emit_robot(model, state))
        emitted += 1
        if emitted >= horizon:
            break
        do_refresh = state.cursor + 1 >= min(refresh_every, w)
        state = _tick(state, model, None, None, do_refresh=do_refresh)
    return np.asarray(out)
