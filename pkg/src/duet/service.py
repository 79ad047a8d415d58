"""Websocket service around the online predictor.

One session per connection: after a hello handshake, every frame message
advances a private rollout state and gets one prediction reply. The model
ticks on a fixed 25 ms grid regardless of arrival jitter; frames faster
than the grid merge into one tick (latest sample wins), gaps are filled by
holding the last hand position and flagging the reply as stale. Sessions
share checkpoints read-only and never interact.
"""

from __future__ import annotations

import importlib.resources
import json
import logging

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .data.synth import JOINT_SETS, human_pose_from_wrist
from .generation import init_state, online_step

log = logging.getLogger(__name__)

TICK_MS = 25  # 40 Hz model grid
MAX_CATCHUP_TICKS = 80  # beyond a 2 s gap, jump the grid instead of replaying
PROTOCOL_VERSION = 1
CLOSE_PROTOCOL_MISMATCH = 4000

_SCHEMA = json.loads(
    importlib.resources.files("duet.protocol").joinpath("messages.schema.json").read_text()
)
_VALIDATORS = {
    name: Draft202012Validator({"$defs": _SCHEMA["$defs"], "$ref": f"#/$defs/{name}"})
    for name in ("client_message", "server_message")
}


def validate_message(msg, direction):
    """Return None if msg conforms to the protocol, else a short reason."""
    err = best_match(_VALIDATORS[direction].iter_errors(msg))
    if err is None:
        return None
    path = ".".join(str(p) for p in err.absolute_path)
    return f"{path}: {err.message}" if path else err.message


def _joint_set_for(model):
    dims = model.human_normalizer.mean.shape[0]
    for name, joints in JOINT_SETS.items():
        if len(joints) * 3 == dims:
            return name, joints.index("r_wrist")
    raise ValueError(f"no joint set matches a {dims}-dim human stream")


class Session:
    """Per-connection predictor state; calls must arrive in order."""

    def __init__(self, model, action, refresh_every):
        self.model = model
        self.action = action
        self.refresh_every = refresh_every
        self.joint_set, self.wrist_idx = _joint_set_for(model)
        self.state = init_state(model, np.zeros(7))
        self.t0_ms = None  # time origin: first frame defines bucket 0
        self.last_t_ms = None
        self.last_bucket = None
        self.last_xy = None
        self.command = None
        self.robot_window = None
        self.human_window = None

    def _advance(self, hand_xy):
        human = human_pose_from_wrist(hand_xy, self.joint_set)
        self.state, self.command, self.robot_window, self.human_window = online_step(
            self.state, self.model, human, refresh_every=self.refresh_every
        )

    def on_frame(self, t_ms, hand_xy):
        """Advance to the frame's tick bucket and return the reply dict.

        Bucket k covers [t0 + k*TICK_MS, t0 + (k+1)*TICK_MS). Skipped buckets
        run on the held hand position and mark the reply stale; a second frame
        in the same bucket merges (no model tick, latest sample wins).
        """
        if self.last_t_ms is not None and t_ms < self.last_t_ms:
            return {"type": "error", "msg": f"t_ms went backwards: {t_ms} < {self.last_t_ms}"}
        stale = False
        if self.t0_ms is None:
            self.t0_ms = t_ms
            self._advance(hand_xy)
            self.last_bucket = 0
        else:
            bucket = (t_ms - self.t0_ms) // TICK_MS
            if bucket > self.last_bucket:
                for _ in range(min(bucket - self.last_bucket - 1, MAX_CATCHUP_TICKS)):
                    self._advance(self.last_xy)
                    stale = True
                self._advance(hand_xy)
                self.last_bucket = bucket
        self.last_t_ms = t_ms
        self.last_xy = hand_xy
        wrist = self.human_window.reshape(-1, len(JOINT_SETS[self.joint_set]), 3)[:, self.wrist_idx, 1:3]
        return {
            "type": "prediction",
            "t_ms": t_ms,
            "robot_frame": self.command.tolist(),
            "robot_window": self.robot_window.tolist(),
            "human_window_hand_xy": wrist.tolist(),
            "stale": stale,
        }


def build_app(models, default_action="hand_shake", refresh_every=4, static_dir=None):
    """FastAPI app exposing /ws; checkpoints are shared read-only."""
    model = models["hme"]
    if model.variant != "hme":
        raise ValueError("the live service needs the conditioned model variant")
    app = FastAPI(title="duet live predictor")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await ws.send_json({"type": "error", "msg": f"invalid JSON: {exc}"})
                    continue
                reason = validate_message(msg, "client_message")
                if reason is not None:
                    await ws.send_json({"type": "error", "msg": f"invalid message: {reason}"})
                    continue
                if msg["type"] == "hello":
                    if msg["protocol"] != PROTOCOL_VERSION:
                        await ws.close(code=CLOSE_PROTOCOL_MISMATCH, reason="unsupported protocol version")
                        return
                    session = Session(model, msg["action"], refresh_every)
                    await ws.send_json(
                        {
                            "type": "hello_ack",
                            "protocol": PROTOCOL_VERSION,
                            "w": model.robot_embedding.window_spec.w,
                            "robot_dims": 7,
                            "action": session.action,
                        }
                    )
                elif msg["type"] == "frame":
                    if session is None:
                        await ws.send_json({"type": "error", "msg": "send hello before frames"})
                        continue
                    await ws.send_json(session.on_frame(msg["t_ms"], msg["hand_xy"]))
                elif msg["type"] == "bye":
                    await ws.close(code=1000)
                    return
        except WebSocketDisconnect:
            log.debug("client disconnected")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
