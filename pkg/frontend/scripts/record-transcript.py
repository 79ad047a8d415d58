"""Record a live-session transcript for the UI conformance test.

Drives the prediction service in-process with a synthetic hand-shake hand
path and writes every message from both directions, in order, to a JSON
fixture. Run after training:

    python3 scripts/record-transcript.py --config ../configs/tiny.toml \
        --out test/fixtures/transcript.json
"""

import argparse
import json
import math
from pathlib import Path

from starlette.testclient import TestClient

from duet.checkpoint import load_model
from duet.config import load_config
from duet.service import build_app

FRAME_MS = 25


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--frames", type=int, default=49, help="hand frames to stream")
    args = ap.parse_args()

    cfg = load_config(args.config)
    model = load_model(cfg.checkpoints_dir / "robot_hme.ckpt")
    app = build_app({"hme": model}, default_action=cfg.serve.action, refresh_every=cfg.serve.refresh_every)

    transcript = []

    def send(ws, msg):
        transcript.append({"direction": "client", "message": msg})
        ws.send_text(json.dumps(msg))

    def recv(ws):
        msg = json.loads(ws.receive_text())
        transcript.append({"direction": "server", "message": msg})
        return msg

    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            send(ws, {"type": "hello", "protocol": 1, "action": "hand_shake"})
            ack = recv(ws)
            assert ack["type"] == "hello_ack", ack
            for i in range(args.frames):
                t = i * FRAME_MS
                # a plausible shake: wrist bobbing near its rest pose
                xy = [0.04 + 0.02 * math.sin(2 * math.pi * 1.25 * t / 1000.0),
                      -0.04 + 0.10 * math.sin(2 * math.pi * 1.25 * t / 1000.0 + 0.8)]
                send(ws, {"type": "frame", "t_ms": t, "hand_xy": [round(v, 6) for v in xy]})
                reply = recv(ws)
                assert reply["type"] == "prediction", reply

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(transcript, indent=1) + "\n")
    print(f"wrote {len(transcript)} messages to {out}")


if __name__ == "__main__":
    main()
