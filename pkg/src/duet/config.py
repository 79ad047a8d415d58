"""Pipeline configuration: TOML in, validated stage configs out.

One file drives the whole pipeline. Sections map to stages; stage seeds
derive from the master seed (stable per-stage offsets) unless a section
pins its own. The config hash covers only computation-relevant sections,
so artifacts can be matched to the settings that produced them no matter
where they live on disk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import jsonschema

from .data import WindowSpec
from .data.synth import default_synth_config
from .dynamics import DynamicsTrainConfig
from .embedding import EmbeddingTrainConfig
from .robot_map import RobotTrainConfig

SEED_OFFSETS = {
    "synth": 0,
    "embedding_human": 1,
    "embedding_robot": 2,
    "dynamics": 3,
    "robot": 4,
}

_TRAIN_COMMON = {
    "epochs": {"type": "integer", "minimum": 1},
    "learning_rate": {"type": "number", "exclusiveMinimum": 0},
    "seed": {"type": "integer"},
}

_EMBEDDING_SECTION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        **_TRAIN_COMMON,
        "latent_dim": {"type": "integer", "minimum": 1},
        "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "kl_warmup_epochs": {"type": "integer", "minimum": 0},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dataset": {"type": "string"},
                "checkpoints": {"type": "string"},
                "reports": {"type": "string"},
            },
        },
        "synth": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer"},
                "joint_set": {"enum": ["full", "arm8"]},
                "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "counts_hhi": {
                    "type": "object",
                    "additionalProperties": {"type": "integer", "minimum": 0},
                },
                "counts_hri": {
                    "type": "object",
                    "additionalProperties": {"type": "integer", "minimum": 0},
                },
            },
        },
        "window": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "w": {"type": "integer", "minimum": 2},
                "stride": {"type": "integer", "minimum": 1},
                "train_stride": {"type": "integer", "minimum": 1},
            },
        },
        "embedding": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"human": _EMBEDDING_SECTION, "robot": _EMBEDDING_SECTION},
        },
        "dynamics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **_TRAIN_COMMON,
                "d_dim": {"type": "integer", "minimum": 1},
                "state_dim": {"type": "integer", "minimum": 1},
                "head_hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "batch_trials": {"type": "integer", "minimum": 1},
                "lr_final_frac": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "tbptt": {"type": "integer", "minimum": 1},
                "jsd_samples": {"type": "integer", "minimum": 1},
                "jsd_weight": {"type": "number", "minimum": 0},
                "kl_reversed": {"type": "boolean"},
            },
        },
        "robot": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **_TRAIN_COMMON,
                "state_dim": {"type": "integer", "minimum": 1},
                "head_hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "batch_trials": {"type": "integer", "minimum": 1},
                "tbptt": {"type": "integer", "minimum": 1},
                "kl_reversed": {"type": "boolean"},
            },
        },
        "baseline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"ridge": {"type": "number", "exclusiveMinimum": 0}},
        },
        "serve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "host": {"type": "string"},
                "port": {"type": "integer", "minimum": 1, "maximum": 65535},
                "action": {"enum": ["hand_shake", "hand_wave", "parachute", "rocket"]},
                "refresh_every": {"type": "integer", "minimum": 1},
            },
        },
    },
}

HASHED_SECTIONS = ("seed", "synth", "window", "embedding", "dynamics", "robot", "baseline")


class ConfigError(ValueError):
    """Invalid configuration; .field_path points at the offending entry."""

    def __init__(self, field_path, message):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


@dataclass(frozen=True)
class ServeOptions:
    host: str = "127.0.0.1"
    port: int = 8400
    action: str = "hand_shake"
    refresh_every: int = 4


@dataclass(frozen=True)
class PipelineConfig:
    raw: dict
    config_hash: str
    seed: int
    dataset_path: Path
    checkpoints_dir: Path
    reports_dir: Path
    synth: object  # SynthConfig
    test_fraction: float
    window: WindowSpec
    train_stride: int
    embedding_human: EmbeddingTrainConfig
    embedding_robot: EmbeddingTrainConfig
    dynamics: DynamicsTrainConfig
    robot: RobotTrainConfig
    baseline_ridge: float
    serve: ServeOptions


def _validate(data):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(path, err.message)


def compute_config_hash(data, seed):
    hashed = {k: data[k] for k in HASHED_SECTIONS if k in data}
    hashed["seed"] = seed
    canon = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _stage_seed(section, master, stage):
    return section.get("seed", master + SEED_OFFSETS[stage])


def config_from_dict(data, seed_override=None, base_dir="."):
    """Build the typed pipeline config; raises ConfigError on bad fields."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a table")
    _validate(data)
    base = Path(base_dir)
    master = seed_override if seed_override is not None else data.get("seed", 0)

    paths = data.get("paths", {})
    dataset_path = base / paths.get("dataset", "artifacts/dataset.jsonl")
    checkpoints_dir = base / paths.get("checkpoints", "artifacts/checkpoints")
    reports_dir = base / paths.get("reports", "artifacts/reports")

    synth_sec = data.get("synth", {})
    synth = default_synth_config(
        seed=_stage_seed(synth_sec, master, "synth"),
        joint_set=synth_sec.get("joint_set", "full"),
        counts_hhi=synth_sec.get("counts_hhi"),
        counts_hri=synth_sec.get("counts_hri"),
    )

    window_sec = data.get("window", {})
    window = WindowSpec(w=window_sec.get("w", 40), stride=window_sec.get("stride", 1))
    train_stride = window_sec.get("train_stride", 1)

    emb_sec = data.get("embedding", {})

    def embedding_config(side, stage):
        sec = emb_sec.get(side, {})
        return EmbeddingTrainConfig(
            latent_dim=sec.get("latent_dim", 32 if side == "human" else 8),
            hidden=tuple(sec.get("hidden", [256, 256])),
            epochs=sec.get("epochs", 40),
            batch_size=sec.get("batch_size", 64),
            learning_rate=sec.get("learning_rate", 1e-3),
            kl_warmup_epochs=sec.get("kl_warmup_epochs", 0),
            seed=_stage_seed(sec, master, stage),
        )

    dyn_sec = data.get("dynamics", {})
    dynamics = DynamicsTrainConfig(
        d_dim=dyn_sec.get("d_dim", 16),
        state_dim=dyn_sec.get("state_dim", 128),
        head_hidden=tuple(dyn_sec.get("head_hidden", [128])),
        epochs=dyn_sec.get("epochs", 40),
        batch_trials=dyn_sec.get("batch_trials", 16),
        learning_rate=dyn_sec.get("learning_rate", 1e-3),
        lr_final_frac=dyn_sec.get("lr_final_frac", 1.0),
        tbptt=dyn_sec.get("tbptt", 64),
        jsd_samples=dyn_sec.get("jsd_samples", 16),
        jsd_weight=dyn_sec.get("jsd_weight", 1.0),
        kl_reversed=dyn_sec.get("kl_reversed", False),
        seed=_stage_seed(dyn_sec, master, "dynamics"),
    )

    robot_sec = data.get("robot", {})
    robot = RobotTrainConfig(
        state_dim=robot_sec.get("state_dim", 128),
        head_hidden=tuple(robot_sec.get("head_hidden", [128])),
        epochs=robot_sec.get("epochs", 40),
        batch_trials=robot_sec.get("batch_trials", 16),
        learning_rate=robot_sec.get("learning_rate", 1e-3),
        tbptt=robot_sec.get("tbptt", 64),
        kl_reversed=robot_sec.get("kl_reversed", False),
        seed=_stage_seed(robot_sec, master, "robot"),
    )

    serve_sec = data.get("serve", {})
    serve = ServeOptions(
        host=serve_sec.get("host", "127.0.0.1"),
        port=serve_sec.get("port", 8400),
        action=serve_sec.get("action", "hand_shake"),
        refresh_every=serve_sec.get("refresh_every", 4),
    )

    return PipelineConfig(
        raw=data,
        config_hash=compute_config_hash(data, master),
        seed=master,
        dataset_path=dataset_path,
        checkpoints_dir=checkpoints_dir,
        reports_dir=reports_dir,
        synth=synth,
        test_fraction=synth_sec.get("test_fraction", 0.2),
        window=window,
        train_stride=train_stride,
        embedding_human=embedding_config("human", "embedding_human"),
        embedding_robot=embedding_config("robot", "embedding_robot"),
        dynamics=dynamics,
        robot=robot,
        baseline_ridge=data.get("baseline", {}).get("ridge", 1e-6),
        serve=serve,
    )


def load_config(path, seed_override=None):
    """Parse and validate a TOML config; paths resolve against the cwd."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"invalid TOML: {exc}")
    return config_from_dict(data, seed_override=seed_override)
