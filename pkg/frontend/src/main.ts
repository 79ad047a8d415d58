// Browser entry point: cursor-driven hand input on the left, live robot arm
// with its decoded future on the same canvas. The cursor position is the
// human hand in scene meters, so predictions land where the eye expects.
import { ARM_REACH, type Point } from "./fk.js";
import { ACTIONS, type Action } from "./protocol.js";
import { buildScene, paintScene } from "./scene.js";
import { LiveSession, type SocketLike } from "./session.js";

const canvas = document.getElementById("stage") as HTMLCanvasElement;
const actionSelect = document.getElementById("action") as HTMLSelectElement;
const ctx = canvas.getContext("2d")!;

for (const a of ACTIONS) {
  const opt = document.createElement("option");
  opt.value = a;
  opt.textContent = a.replace("_", " ");
  actionSelect.appendChild(opt);
}

function wsUrl(): string {
  if (location.protocol.startsWith("http")) {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    return `${scheme}://${location.host}/ws`;
  }
  return "ws://127.0.0.1:8400/ws"; // opened from disk: assume the default service
}

function fitCanvas(): void {
  canvas.width = canvas.clientWidth * devicePixelRatio;
  canvas.height = canvas.clientHeight * devicePixelRatio;
}
window.addEventListener("resize", fitCanvas);
fitCanvas();

// Inverse of the painter's meters->pixels transform: the cursor lives in the
// same (y, z) plane as the arm, z up.
function pixelToMeters(px: number, py: number): Point {
  const scale = Math.min(canvas.width, canvas.height) / (2.6 * ARM_REACH);
  const cx = canvas.width * 0.38;
  const cy = canvas.height * 0.58;
  return [(px - cx) / scale, (cy - py) / scale];
}

let session: LiveSession | null = null;

function startSession(action: Action): void {
  session?.stop();
  session = new LiveSession(wsUrl(), action, (url) => new WebSocket(url) as unknown as SocketLike);
  session.onProtocolError = (reason) => console.error("protocol error:", reason);
  session.start();
}

actionSelect.addEventListener("change", () => startSession(actionSelect.value as Action));
startSession(ACTIONS[0]!);

canvas.addEventListener("mousemove", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const px = (ev.clientX - rect.left) * devicePixelRatio;
  const py = (ev.clientY - rect.top) * devicePixelRatio;
  session?.pushHand(performance.now(), pixelToMeters(px, py));
});

setInterval(() => session?.flush(performance.now()), 10);

function paint(): void {
  if (session !== null) {
    paintScene(ctx, buildScene(session.currentView()), canvas.width, canvas.height);
  }
  requestAnimationFrame(paint);
}
requestAnimationFrame(paint);
