"""Command-line pipeline: synth -> embeddings -> dynamics -> robot map -> eval.

Stages run in the four-step training order (human embedding, task dynamics,
robot embedding, embodiment mapping); asking for a stage whose inputs are
missing exits with status 2 and names the stage to run first. Every artifact
embeds the config hash that produced it and eval refuses hash mismatches
unless --force. APP_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import fit_gaussian_baseline
from .checkpoint import load_model, save_model
from .config import ConfigError, load_config
from .data import (
    WindowSpec,
    extract_windows,
    fit_normalizer,
    load_dataset,
    save_dataset,
    split_trials,
    synth_generate_hhi,
    synth_generate_hri,
)
from .data.io import atomic_write_text
from .dynamics import train_dynamics
from .embedding import train_embedding
from .eval import human_mspe_curve, run_benchmark, write_report
from .generation import rollout_robot
from .robot_map import train_robot_mapping

log = logging.getLogger("duet.cli")

# Training-order prerequisites: artifact key -> (file stem, producing command,
# position in the four-step schedule).
ARTIFACTS = {
    "dataset": (None, "duet synth", "the dataset stage"),
    "embedding_human": ("embedding_human", "duet train-embedding --agent human", "Step 1 (human motion embedding)"),
    "dynamics": ("dynamics", "duet train-dynamics", "Step 2 (shared task dynamics)"),
    "embedding_robot": ("embedding_robot", "duet train-embedding --agent robot", "Step 3 (robot motion embedding)"),
    "robot_hme": ("robot_hme", "duet train-robot", "Step 4 (embodiment mapping)"),
    "robot_raw_hr": ("robot_raw_hr", "duet train-robot", "Step 4 (embodiment mapping)"),
    "robot_raw_r": ("robot_raw_r", "duet train-robot", "Step 4 (embodiment mapping)"),
    "baseline": ("baseline_gaussian", "duet train-baselines", "the baseline stage"),
}


class StageError(RuntimeError):
    """Missing prerequisite artifact; maps to exit status 2."""


def _artifact_path(cfg, key):
    if key == "dataset":
        return cfg.dataset_path
    return cfg.checkpoints_dir / f"{ARTIFACTS[key][0]}.ckpt"


def _require(cfg, key):
    path = _artifact_path(cfg, key)
    if not path.exists():
        _, command, step = ARTIFACTS[key]
        raise StageError(f"missing {path}; run `{command}` first; {step} of the training order")
    return path


def _load_trials(cfg):
    _require(cfg, "dataset")
    trials = load_dataset(cfg.dataset_path)
    hhi = [t for t in trials if t.pair_type == "HHI"]
    hri = [t for t in trials if t.pair_type == "HRI"]
    hhi_train, hhi_test = split_trials(hhi, cfg.test_fraction, seed=cfg.synth.seed)
    hri_train, hri_test = split_trials(hri, cfg.test_fraction, seed=cfg.synth.seed)
    return {"hhi_train": hhi_train, "hhi_test": hhi_test, "hri_train": hri_train, "hri_test": hri_test}


def _check_hash(cfg, header, path, force):
    stored = header.get("config_hash")
    if stored != cfg.config_hash:
        msg = f"{path} was produced by config {stored}, current is {cfg.config_hash}"
        if not force:
            raise StageError(msg + "; rerun the stage or pass --force")
        log.warning("%s (continuing under --force)", msg)


def _save_ckpt(cfg, key, model):
    path = _artifact_path(cfg, key)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(path, model, extra_header={"config_hash": cfg.config_hash, "seed": cfg.seed})
    log.info("wrote %s", path)
    return path


def _load_ckpt(cfg, key, force=False):
    path = _require(cfg, key)
    model, header = load_model(path, with_header=True)
    _check_hash(cfg, header, path, force)
    return model


def _write_trace(cfg, name, trace):
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.reports_dir / f"trace_{name}.json"
    atomic_write_text(path, json.dumps({"config_hash": cfg.config_hash, **trace}, indent=2) + "\n")


# ---- stage implementations --------------------------------------------------


def cmd_synth(cfg, args):
    trials = synth_generate_hhi(cfg.synth) + synth_generate_hri(cfg.synth)
    out = Path(args.out) if args.out else cfg.dataset_path
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(trials, out)
    meta = {
        "config_hash": cfg.config_hash,
        "seed": cfg.synth.seed,
        "joint_set": cfg.synth.joint_set,
        "n_trials": len(trials),
        "n_hhi": sum(t.pair_type == "HHI" for t in trials),
        "n_hri": sum(t.pair_type == "HRI" for t in trials),
    }
    atomic_write_text(out.with_suffix(".meta.json"), json.dumps(meta, indent=2) + "\n")
    log.info("wrote %d trials to %s", len(trials), out)
    return 0


def _train_embedding_side(cfg, splits, agent_kind):
    if agent_kind == "human":
        trials = splits["hhi_train"]
        train_cfg = cfg.embedding_human
        streams = [s for t in trials for s in (t.a1, t.a2) if s.agent_kind == "human"]
    else:
        trials = splits["hri_train"]
        train_cfg = cfg.embedding_robot
        streams = [t.a2 for t in trials]
    norm = fit_normalizer(trials, agent_kind)
    spec = WindowSpec(w=cfg.window.w, stride=cfg.train_stride)
    from .data.ops import apply_normalizer

    blocks = []
    for stream in streams:
        if stream.length < cfg.window.w:
            continue
        _, wins = extract_windows(apply_normalizer(norm, stream.frames), spec)
        blocks.append(wins)
    if not blocks:
        raise StageError(f"no {agent_kind} stream is at least w={cfg.window.w} frames long")
    windows = np.concatenate(blocks, axis=0)
    log.info("training %s embedding on %d windows of dim %d", agent_kind, *windows.shape)
    model, trace = train_embedding(windows, train_cfg, WindowSpec(w=cfg.window.w, stride=1), norm, agent_kind)
    _save_ckpt(cfg, f"embedding_{agent_kind}", model)
    _write_trace(cfg, f"embedding_{agent_kind}", trace)


def cmd_train_embedding(cfg, args):
    splits = _load_trials(cfg)
    sides = ("human", "robot") if args.agent == "both" else (args.agent,)
    for side in sides:
        _train_embedding_side(cfg, splits, side)
    return 0


def cmd_train_dynamics(cfg, args):
    splits = _load_trials(cfg)
    embedding = _load_ckpt(cfg, "embedding_human", args.force)
    model, trace = train_dynamics(splits["hhi_train"], embedding, cfg.dynamics)
    _save_ckpt(cfg, "dynamics", model)
    _write_trace(cfg, "dynamics", trace)
    return 0


def cmd_train_robot(cfg, args):
    splits = _load_trials(cfg)
    robot_embedding = _load_ckpt(cfg, "embedding_robot", args.force)
    dynamics = _load_ckpt(cfg, "dynamics", args.force)
    variants = ("hme", "raw_hr", "raw_r") if args.variant == "all" else (args.variant,)
    for variant in variants:
        model, trace = train_robot_mapping(splits["hri_train"], robot_embedding, dynamics, cfg.robot, variant=variant)
        _save_ckpt(cfg, f"robot_{variant}", model)
        _write_trace(cfg, f"robot_{variant}", trace)
    return 0


def cmd_train_baselines(cfg, args):
    splits = _load_trials(cfg)
    model = fit_gaussian_baseline(splits["hri_train"], ridge=cfg.baseline_ridge)
    _save_ckpt(cfg, "baseline", model)
    return 0


def cmd_eval(cfg, args):
    from .figures import plot_entrainment_factors, plot_mspe_curves, plot_nrmsd_bars

    splits = _load_trials(cfg)
    models = {v: _load_ckpt(cfg, f"robot_{v}", args.force) for v in ("hme", "raw_hr", "raw_r")}
    baseline = _load_ckpt(cfg, "baseline", args.force)
    robot_norm = models["hme"].robot_embedding.normalizer
    series = {}
    report = run_benchmark(
        models,
        baseline,
        splits["hri_test"],
        robot_norm.j_min,
        robot_norm.j_max,
        seed=cfg.seed,
        config_hash=cfg.config_hash,
        series_out=series,
    )
    report["human_mspe_curve"] = human_mspe_curve(models["hme"].dynamics, splits["hhi_test"]).tolist()
    out_dir = Path(args.out) if args.out else cfg.reports_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(report, out_dir / "report.json", out_dir / "report.csv")
    plot_mspe_curves(report, out_dir / "mspe.png")
    plot_nrmsd_bars(report, out_dir / "nrmsd.png")
    if series:
        plot_entrainment_factors(series, out_dir / "entrainment.png")
    log.info("report written to %s", out_dir)
    for name, metrics in report["methods"].items():
        log.info("  %-8s all-joint NRMSD %.4f", name, metrics["nrmsd_avg"])
    return 0


def cmd_rollout(cfg, args):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    splits = _load_trials(cfg)
    model = _load_ckpt(cfg, "robot_hme", args.force)
    trials = splits["hri_test"] or splits["hri_train"]
    if args.trial is not None:
        matches = [t for t in trials if t.trial_id == args.trial]
        if not matches:
            raise StageError(f"trial {args.trial!r} not found among {len(trials)} held-out trials")
        trial = matches[0]
    else:
        trial = trials[0]
    prefix = args.prefix
    horizon = min(args.horizon, trial.a2.length - prefix)
    if horizon < 1:
        raise StageError(f"trial {trial.trial_id} has only {trial.a2.length} frames; shorten --prefix")
    pred = rollout_robot(model, trial.a1.frames[:prefix], trial.a2.frames[:prefix], horizon)
    true = trial.a2.frames[prefix : prefix + horizon]

    out_dir = Path(args.out) if args.out else cfg.reports_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["frame," + ",".join(f"pred_j{j+1}" for j in range(7)) + "," + ",".join(f"true_j{j+1}" for j in range(7))]
    for i in range(horizon):
        lines.append(
            f"{prefix + i},"
            + ",".join(repr(float(v)) for v in pred[i])
            + ","
            + ",".join(repr(float(v)) for v in true[i])
        )
    atomic_write_text(out_dir / "rollout.csv", "\n".join(lines) + "\n")

    fig, axes = plt.subplots(7, 1, figsize=(7, 10), sharex=True)
    t = np.arange(prefix + horizon) / trial.a2.rate_hz
    for j, ax in enumerate(axes):
        ax.plot(t, trial.a2.frames[: prefix + horizon, j], label="recorded")
        ax.plot(t[prefix:], pred[:, j], label="predicted")
        ax.axvline(t[prefix], color="gray", lw=0.8)
        ax.set_ylabel(f"j{j+1}")
    axes[0].legend(loc="upper right")
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(out_dir / "rollout.png", dpi=120)
    plt.close(fig)
    log.info("rollout on trial %s written to %s", trial.trial_id, out_dir)
    return 0


def cmd_serve(cfg, args):
    import uvicorn

    from .service import build_app

    checkpoints = {
        "hme": _load_ckpt(cfg, "robot_hme", args.force),
    }
    app = build_app(
        checkpoints,
        default_action=cfg.serve.action,
        refresh_every=cfg.serve.refresh_every,
        static_dir=args.static,
    )
    host = args.host or cfg.serve.host
    port = args.port or cfg.serve.port
    log.info("serving on ws://%s:%d/ws", host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


# ---- argument plumbing ------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="duet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML pipeline config")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the stage output path")
        p.add_argument("--force", action="store_true", help="ignore config-hash mismatches")
        p.set_defaults(fn=fn)
        return p

    add("synth", cmd_synth)
    p = add("train-embedding", cmd_train_embedding)
    p.add_argument("--agent", choices=("human", "robot", "both"), default="both")
    add("train-dynamics", cmd_train_dynamics)
    p = add("train-robot", cmd_train_robot)
    p.add_argument("--variant", choices=("hme", "raw_hr", "raw_r", "all"), default="all")
    add("train-baselines", cmd_train_baselines)
    add("eval", cmd_eval)
    p = add("rollout", cmd_rollout)
    p.add_argument("--trial", default=None, help="trial id (default: first held-out trial)")
    p.add_argument("--prefix", type=int, default=10, help="observed frames before prediction")
    p.add_argument("--horizon", type=int, default=120, help="predicted frames")
    p = add("serve", cmd_serve)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--static", default=None, help="directory with the browser UI to serve at /")
    return parser


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("APP_LOG", "INFO").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
    except ConfigError as exc:
        print(f"error: invalid config; {exc}", file=sys.stderr)
        return 1
    log.info(
        "duet %s | python %s | numpy %s | seed %d | config %s (%s)",
        __version__, platform.python_version(), np.__version__, cfg.seed, args.config, cfg.config_hash,
    )
    start = time.time()
    try:
        status = args.fn(cfg, args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: invalid config; {exc}", file=sys.stderr)
        return 1
    log.info("%s finished in %.1f s", args.command, time.time() - start)
    return status


if __name__ == "__main__":
    sys.exit(main())
