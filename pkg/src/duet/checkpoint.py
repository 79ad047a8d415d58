"""Single-file checkpoints: JSON header + indexed little-endian float64 blocks.

Layout: [u32 header length][header JSON][u32 index length][index JSON][blocks].
The header carries format_version, model_kind, the training config, and any
normalizers; the index maps block names to byte offsets and shapes. Round
trips are bit exact because block bytes are raw '<f8' buffers.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data.io import atomic_write_bytes
from .data.types import Normalizer

FORMAT_VERSION = 1


def write_container(path, header: dict, blocks: dict):
    header = dict(header)
    header["format_version"] = FORMAT_VERSION
    index = []
    offset = 0
    payload = []
    for name in sorted(blocks):
        arr = np.ascontiguousarray(np.asarray(blocks[name], dtype="<f8"))
        index.append({"name": name, "offset": offset, "shape": list(arr.shape)})
        raw = arr.tobytes()
        payload.append(raw)
        offset += len(raw)
    header_json = json.dumps(header, separators=(",", ":")).encode("utf-8")
    index_json = json.dumps(index, separators=(",", ":")).encode("utf-8")
    out = b"".join(
        [
            struct.pack("<I", len(header_json)),
            header_json,
            struct.pack("<I", len(index_json)),
            index_json,
            *payload,
        ]
    )
    atomic_write_bytes(path, out)


def read_container(path):
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise ValueError(f"{path}: truncated checkpoint")
    (header_len,) = struct.unpack_from("<I", data, 0)
    header_end = 4 + header_len
    header = json.loads(data[4:header_end].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {header.get('format_version')}")
    (index_len,) = struct.unpack_from("<I", data, header_end)
    index_end = header_end + 4 + index_len
    index = json.loads(data[header_end + 4 : index_end].decode("utf-8"))
    blocks = {}
    for entry in index:
        start = index_end + entry["offset"]
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=start)
        blocks[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header, blocks


def _normalizer_to_json(norm):
    return None if norm is None else norm.to_dict()


def _normalizer_from_json(obj):
    return None if obj is None else Normalizer.from_dict(obj)


def _prefixed(params: dict, prefix: str) -> dict:
    return {prefix + k: v for k, v in params.items()}


def _unprefixed(blocks: dict, prefix: str) -> dict:
    return {k[len(prefix) :]: v for k, v in blocks.items() if k.startswith(prefix)}


def save_model(path, model, extra_header=None):
    """Serialize any trained artifact; nested frozen models ride along.

    extra_header entries (e.g. the producing config hash) are stored verbatim
    and returned by load_model as the second element.
    """
    parts = {
        "embedding": _embedding_parts,
        "dynamics": _dynamics_parts,
        "robot_map": _robot_parts,
        "gaussian_baseline": _baseline_parts,
    }.get(getattr(model, "model_kind", None))
    if parts is None:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    header, blocks = parts(model)
    if extra_header:
        header.update(extra_header)
    write_container(path, header, blocks)


def load_model(path, with_header=False):
    header, blocks = read_container(path)
    model = _model_from_parts(header, blocks)
    return (model, header) if with_header else model


def _model_from_parts(header, blocks):
    kind = header.get("model_kind")
    if kind == "embedding":
        return _embedding_from_parts(header, blocks)
    if kind == "dynamics":
        return _dynamics_from_parts(header, blocks)
    if kind == "robot_map":
        return _robot_from_parts(header, blocks)
    if kind == "gaussian_baseline":
        return _baseline_from_parts(header, blocks)
    raise ValueError(f"unknown model_kind {kind!r}")


def _embedding_parts(model):
    header = {
        "model_kind": "embedding",
        "config": model.config,
        "normalizer": _normalizer_to_json(model.normalizer),
        "meta": {
            "latent_dim": model.latent_dim,
            "agent_kind": model.agent_kind,
            "hidden": list(model.hidden),
            "window": {"w": model.window_spec.w, "stride": model.window_spec.stride},
        },
    }
    return header, dict(model.params)


def _embedding_from_parts(header, blocks):
    from .data.types import WindowSpec
    from .embedding import EmbeddingModel

    meta = header["meta"]
    return EmbeddingModel(
        params=blocks,
        latent_dim=meta["latent_dim"],
        window_spec=WindowSpec(**meta["window"]),
        normalizer=_normalizer_from_json(header.get("normalizer")),
        agent_kind=meta["agent_kind"],
        hidden=tuple(meta["hidden"]),
        config=header.get("config", {}),
    )


def _dynamics_parts(model):
    emb_header, emb_blocks = _embedding_parts(model.embedding)
    header = {
        "model_kind": "dynamics",
        "config": model.config,
        "normalizer": None,
        "meta": {
            "d_dim": model.d_dim,
            "state_dim": model.state_dim,
            "hidden": list(model.hidden),
            "embedding": emb_header,
        },
    }
    blocks = dict(model.params)
    blocks.update(_prefixed(emb_blocks, "embedding/"))
    return header, blocks


def _dynamics_from_parts(header, blocks):
    from .dynamics import DynamicsModel

    meta = header["meta"]
    embedding = _embedding_from_parts(meta["embedding"], _unprefixed(blocks, "embedding/"))
    own = {k: v for k, v in blocks.items() if not k.startswith("embedding/")}
    return DynamicsModel(
        params=own,
        d_dim=meta["d_dim"],
        state_dim=meta["state_dim"],
        embedding=embedding,
        hidden=tuple(meta["hidden"]),
        config=header.get("config", {}),
    )


def _robot_parts(model):
    emb_header, emb_blocks = _embedding_parts(model.robot_embedding)
    header = {
        "model_kind": "robot_map",
        "config": model.config,
        "normalizer": _normalizer_to_json(model.human_normalizer),
        "meta": {
            "variant": model.variant,
            "state_dim": model.state_dim,
            "hidden": list(model.hidden),
            "robot_embedding": emb_header,
            "dynamics": None,
        },
    }
    blocks = dict(model.params)
    blocks.update(_prefixed(emb_blocks, "robot_embedding/"))
    if model.dynamics is not None:
        dyn_header, dyn_blocks = _dynamics_parts(model.dynamics)
        header["meta"]["dynamics"] = dyn_header
        blocks.update(_prefixed(dyn_blocks, "dynamics/"))
    return header, blocks


def _robot_from_parts(header, blocks):
    from .robot_map import RobotInteractionModel

    meta = header["meta"]
    robot_embedding = _embedding_from_parts(meta["robot_embedding"], _unprefixed(blocks, "robot_embedding/"))
    dyn = None
    if meta.get("dynamics") is not None:
        dyn = _dynamics_from_parts(meta["dynamics"], _unprefixed(blocks, "dynamics/"))
    own = {
        k: v
        for k, v in blocks.items()
        if not k.startswith("robot_embedding/") and not k.startswith("dynamics/")
    }
    return RobotInteractionModel(
        params=own,
        variant=meta["variant"],
        state_dim=meta["state_dim"],
        robot_embedding=robot_embedding,
        dynamics=dyn,
        hidden=tuple(meta["hidden"]),
        config=header.get("config", {}),
        human_normalizer=_normalizer_from_json(header.get("normalizer")),
    )


def _baseline_parts(model):
    header = {
        "model_kind": "gaussian_baseline",
        "config": model.config,
        "normalizer": _normalizer_to_json(model.normalizer),
        "meta": {
            "actions": list(model.means.keys()),
            "t_ref": {a: int(model.means[a].shape[0]) for a in model.means},
            "dims": model.dims,
        },
    }
    blocks = {}
    for action in model.means:
        blocks[f"mean/{action}"] = model.means[action]
        blocks[f"chol/{action}"] = model.chols[action]
    return header, blocks


def _baseline_from_parts(header, blocks):
    from .baselines import GaussianTrajectoryModel

    meta = header["meta"]
    means = {a: blocks[f"mean/{a}"] for a in meta["actions"]}
    chols = {a: blocks[f"chol/{a}"] for a in meta["actions"]}
    return GaussianTrajectoryModel(
        means=means,
        chols=chols,
        dims=meta["dims"],
        normalizer=_normalizer_from_json(header.get("normalizer")),
        config=header.get("config", {}),
    )
