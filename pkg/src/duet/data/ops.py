"""Resampling, windowing, normalization, and trial splitting."""

from __future__ import annotations

import numpy as np

from .types import ACTIONS, AgentStream, Normalizer, WindowSpec


def resample(stream: AgentStream, target_hz: float) -> AgentStream:
    """Linear interpolation at target timestamps spanning the original span."""
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz == stream.rate_hz:
        out = stream.copy()
        return out
    if stream.length < 2:
        raise ValueError("cannot resample a stream shorter than 2 frames")
    duration = (stream.length - 1) / stream.rate_hz
    n_out = int(np.floor(duration * target_hz)) + 1
    t_out = np.arange(n_out) / target_hz
    t_in = np.arange(stream.length) / stream.rate_hz
    frames = np.empty((n_out, stream.dims))
    for d in range(stream.dims):
        frames[:, d] = np.interp(t_out, t_in, stream.frames[:, d])
    return AgentStream(stream.agent_kind, frames, target_hz)


def extract_windows(frames, spec: WindowSpec):
    """All windows x_{t:t+w} at t = 0, stride, 2*stride, ...

    Returns (starts, windows) with windows (N, w*dims), frame-major rows.
    Accepts an AgentStream or a raw (T, dims) array.
    """
    if isinstance(frames, AgentStream):
        frames = frames.frames
    frames = np.asarray(frames, dtype=np.float64)
    T, dims = frames.shape
    w, stride = spec.w, spec.stride
    if T < w:
        raise ValueError(f"stream length {T} shorter than window {w}")
    count = (T - w) // stride + 1
    starts = np.arange(count) * stride
    windows = np.empty((count, w * dims))
    for i, t in enumerate(starts):
        windows[i] = frames[t : t + w].reshape(-1)
    return starts, windows


def _gather_frames(trials, agent_kind):
    blocks = []
    for trial in trials:
        for stream in (trial.a1, trial.a2):
            if stream.agent_kind == agent_kind:
                blocks.append(stream.frames)
    if not blocks:
        raise ValueError(f"no {agent_kind} streams in the given trials")
    return np.concatenate(blocks, axis=0)


def fit_normalizer(train_trials, agent_kind: str) -> Normalizer:
    frames = _gather_frames(train_trials, agent_kind)
    if agent_kind == "human":
        mean = frames.mean(axis=0)
        std = frames.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return Normalizer(agent_kind="human", mean=mean, std=std)
    j_min = frames.min(axis=0)
    j_max = frames.max(axis=0)
    return Normalizer(agent_kind="robot", j_min=j_min, j_max=j_max)


def _robot_scale(norm: Normalizer):
    span = norm.j_max - norm.j_min
    return np.where(span < 1e-12, 1.0, span)


def apply_normalizer(norm: Normalizer, frames):
    frames = np.asarray(frames, dtype=np.float64)
    if norm.agent_kind == "human":
        return (frames - norm.mean) / norm.std
    return 2.0 * (frames - norm.j_min) / _robot_scale(norm) - 1.0


def invert_normalizer(norm: Normalizer, frames):
    frames = np.asarray(frames, dtype=np.float64)
    if norm.agent_kind == "human":
        return frames * norm.std + norm.mean
    return (frames + 1.0) * 0.5 * _robot_scale(norm) + norm.j_min


def split_trials(trials, test_fraction: float, seed: int = 0):
    """Whole-trial split stratified by action, deterministic given seed."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test_idx = set()
    for action in ACTIONS:
        idx = [i for i, t in enumerate(trials) if t.action == action]
        if not idx:
            continue
        n_test = int(round(len(idx) * test_fraction))
        picked = rng.permutation(len(idx))[:n_test]
        test_idx.update(idx[p] for p in picked)
    train = [t for i, t in enumerate(trials) if i not in test_idx]
    test = [t for i, t in enumerate(trials) if i in test_idx]
    return train, test
