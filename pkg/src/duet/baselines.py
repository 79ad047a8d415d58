"""Non-adaptive and ablated baselines for the benchmark.

The Gaussian trajectory model groups robot trials by action, time-aligns
them with DTW onto a fixed per-action length, and fits one full-covariance
Gaussian per joint over the aligned trajectory. A sample is a whole motion
with no input from the human partner. The raw-input ablations reuse the
robot-mapping trainer with different conditioning streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data.dtw import dtw_align
from .robot_map import train_robot_mapping


@dataclass
class GaussianTrajectoryModel:
    """Per-action, per-joint Gaussians over DTW-aligned trajectories."""

    model_kind = "gaussian_baseline"

    means: dict  # action -> (T_ref, dims)
    chols: dict  # action -> (dims, T_ref, T_ref) Cholesky factors
    dims: int
    normalizer: object = None
    config: dict = field(default_factory=dict)

    def t_ref(self, action):
        return self.means[action].shape[0]


def fit_gaussian_baseline(trials, ridge=1e-6):
    """Fit the trajectory Gaussians on the robot stream of training trials.

    Covariances get a ridge of ridge * mean(diag) (falling back to 1e-12 when
    the aligned trials are identical and the diagonal is zero) so the
    Cholesky factorization always exists.
    """
    by_action = {}
    for trial in trials:
        if trial.a2.agent_kind != "robot":
            raise ValueError(f"trial {trial.trial_id}: baseline needs robot a2 streams")
        by_action.setdefault(trial.action, []).append(trial.a2.frames)
    if not by_action:
        raise ValueError("no trials to fit")
    means, chols = {}, {}
    dims = None
    for action, streams in sorted(by_action.items()):
        if len(streams) < 2:
            raise ValueError(f"action {action!r}: need at least 2 trials, got {len(streams)}")
        t_ref, aligned_list = dtw_align(streams)
        aligned = np.asarray(aligned_list)  # (N, T_ref, dims)
        dims = aligned.shape[2]
        means[action] = aligned.mean(axis=0)
        chol = np.empty((dims, t_ref, t_ref))
        for j in range(dims):
            rows = aligned[:, :, j]
            cov = np.cov(rows, rowvar=False, bias=False)
            cov = np.atleast_2d(cov)
            diag_mean = float(np.trace(cov)) / t_ref
            eps = ridge * diag_mean if diag_mean > 0.0 else 1e-12
            chol[j] = np.linalg.cholesky(cov + eps * np.eye(t_ref))
        chols[action] = chol
    return GaussianTrajectoryModel(means=means, chols=chols, dims=dims, config={"ridge": ridge})


def sample_gaussian_baseline(model, action, rng):
    """One whole-trajectory sample (T_ref, dims); joints draw independently."""
    if action not in model.means:
        raise KeyError(f"unknown action {action!r}")
    mean = model.means[action]
    t_ref = mean.shape[0]
    out = np.empty_like(mean)
    for j in range(model.dims):
        out[:, j] = mean[:, j] + model.chols[action][j] @ rng.standard_normal(t_ref)
    return out


def baseline_trajectory_for_trial(model, action, length, rng):
    """Sample resized to a trial length: truncated, or held at the last frame."""
    sample = sample_gaussian_baseline(model, action, rng)
    if length <= sample.shape[0]:
        return sample[:length]
    pad = np.tile(sample[-1], (length - sample.shape[0], 1))
    return np.concatenate([sample, pad], axis=0)


def train_raw_variant(trials, robot_embedding, conditioning, config, variant):
    """Train the "raw_hr" / "raw_r" ablations with the shared robot trainer.

    `conditioning` is a human Normalizer (or dynamics model) for "raw_hr" and
    ignored for "raw_r".
    """
    if variant not in ("raw_hr", "raw_r"):
        raise ValueError(f"raw variant must be raw_hr or raw_r, got {variant!r}")
    return train_robot_mapping(trials, robot_embedding, conditioning, config, variant=variant)
