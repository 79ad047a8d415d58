"""Matplotlib renderings of benchmark reports and training traces."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METHOD_ORDER = ("hme", "raw_hr", "raw_r", "gaussian")
METHOD_LABELS = {
    "hme": "Motion embedding",
    "raw_hr": "Raw human+robot",
    "raw_r": "Raw robot",
    "gaussian": "Gaussian trajectory",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_mspe_curves(report, path):
    """Horizon error per method, one line each."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in METHOD_ORDER:
        metrics = report.get("methods", {}).get(name)
        if metrics is None:
            continue
        curve = np.asarray(metrics["mspe_curve"])
        ax.plot(np.arange(1, curve.shape[0] + 1), curve, label=METHOD_LABELS.get(name, name))
    ax.set_xlabel("prediction offset (frames)")
    ax.set_ylabel("mean squared prediction error")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_nrmsd_bars(report, path):
    """Per-joint range-normalized deviation, grouped bars per method."""
    methods = [m for m in METHOD_ORDER if m in report.get("methods", {})]
    if not methods:
        raise ValueError("report has no methods to plot")
    n_joints = len(report["methods"][methods[0]]["nrmsd_per_joint"])
    x = np.arange(n_joints)
    width = 0.8 / len(methods)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, name in enumerate(methods):
        vals = report["methods"][name]["nrmsd_per_joint"]
        ax.bar(x + (i - (len(methods) - 1) / 2) * width, vals, width, label=METHOD_LABELS.get(name, name))
    ax.set_xticks(x)
    ax.set_xticklabels([f"joint {j + 1}" for j in range(n_joints)])
    ax.set_ylabel("NRMSD")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    return _save(fig, path)


def plot_entrainment_factors(factor_scores, path):
    """Overlay of matching factor-score traces, one panel per action.

    factor_scores: action -> (human_scores (T,), robot_scores (T,)).
    """
    actions = sorted(factor_scores)
    fig, axes = plt.subplots(len(actions), 1, figsize=(7, 2.2 * len(actions)), squeeze=False)
    for ax, action in zip(axes[:, 0], actions):
        human, robot = factor_scores[action]
        ax.plot(np.asarray(human), label="human task state")
        ax.plot(np.asarray(robot), label="robot latent")
        ax.set_title(action)
        ax.grid(alpha=0.3)
    axes[0, 0].legend(loc="upper right")
    axes[-1, 0].set_xlabel("frame")
    fig.tight_layout()
    return _save(fig, path)


def plot_loss_traces(traces, path):
    """Per-epoch training losses; traces: name -> list of floats."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in sorted(traces.items()):
        ax.plot(values, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)
