"""JSON-lines dataset files: one trial per line, lossless float round trip."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .types import AgentStream, InteractionTrial


def atomic_write_text(path, text: str):
    """Write via a temp file + rename so readers never see partial output."""
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _stream_to_json(stream: AgentStream) -> dict:
    return {
        "kind": stream.agent_kind,
        "dims": stream.dims,
        "frames": stream.frames.tolist(),
    }


def _trial_to_json(trial: InteractionTrial) -> dict:
    return {
        "trial_id": trial.trial_id,
        "action": trial.action,
        "pair_type": trial.pair_type,
        "rate_hz": trial.a1.rate_hz,
        "leader": trial.leader_role,
        "a1": _stream_to_json(trial.a1),
        "a2": _stream_to_json(trial.a2),
    }


def save_dataset(trials, path):
    lines = [json.dumps(_trial_to_json(t), separators=(",", ":")) for t in trials]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def _require(obj: dict, field: str, line_no: int):
    if field not in obj:
        raise ValueError(f"line {line_no}: missing field '{field}'")
    return obj[field]


def _parse_stream(obj: dict, rate_hz: float, line_no: int, which: str) -> AgentStream:
    kind = _require(obj, "kind", line_no)
    dims = _require(obj, "dims", line_no)
    frames = _require(obj, "frames", line_no)
    try:
        stream = AgentStream(kind, frames, rate_hz)
    except ValueError as exc:
        raise ValueError(f"line {line_no}: field '{which}': {exc}") from exc
    if stream.dims != dims:
        raise ValueError(f"line {line_no}: field '{which}.dims': declared {dims}, frames have {stream.dims}")
    return stream


def load_dataset(path):
    trials = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid JSON: {exc}") from exc
            rate_hz = _require(obj, "rate_hz", line_no)
            try:
                trial = InteractionTrial(
                    trial_id=_require(obj, "trial_id", line_no),
                    action=_require(obj, "action", line_no),
                    pair_type=_require(obj, "pair_type", line_no),
                    a1=_parse_stream(_require(obj, "a1", line_no), rate_hz, line_no, "a1"),
                    a2=_parse_stream(_require(obj, "a2", line_no), rate_hz, line_no, "a2"),
                    leader_role=obj.get("leader"),
                )
            except ValueError as exc:
                if str(exc).startswith("line "):
                    raise
                raise ValueError(f"line {line_no}: {exc}") from exc
            trials.append(trial)
    return trials
