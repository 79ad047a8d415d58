// Pure scene construction: latest validated messages + local hand trail in,
// drawable primitives out. No canvas access here, so tests can assert on
// geometry directly.
import { ARM_REACH, planarArmPoints, type Point } from "./fk.js";
import type { HelloAckMsg, PredictionMsg } from "./protocol.js";

export type ConnectionState = "connecting" | "ready" | "reconnect" | "closed";

export interface SessionView {
  connection: ConnectionState;
  ack: HelloAckMsg | null;
  prediction: PredictionMsg | null;
  handTrail: Point[]; // recent outgoing hand positions, meters, oldest first
  latencyMs: number | null;
}

export interface GhostArm {
  points: Point[];
  alpha: number;
}

export interface Dial {
  label: string;
  angle: number; // radians, joint angle shown as a needle
}

export interface Scene {
  arm: Point[] | null; // 4 chain points, meters, base first
  ghostArms: GhostArm[]; // decoded robot window, fading into the future
  ghostHand: { xy: Point; alpha: number }[]; // predicted hand path
  dials: Dial[]; // joints 4..7 of the latest command
  handTrail: Point[];
  stale: boolean;
  status: string;
}

export const GHOST_STRIDE = 5; // draw every 5th window frame (8 ghosts at w=40)

export function buildScene(view: SessionView): Scene {
  const pred = view.prediction;
  const scene: Scene = {
    arm: null,
    ghostArms: [],
    ghostHand: [],
    dials: [],
    handTrail: view.handTrail.slice(),
    stale: pred?.stale ?? false,
    status: statusLine(view),
  };
  if (pred === null) return scene;

  scene.arm = planarArmPoints(pred.robot_frame);
  const w = pred.robot_window.length;
  for (let i = GHOST_STRIDE - 1; i < w; i += GHOST_STRIDE) {
    scene.ghostArms.push({
      points: planarArmPoints(pred.robot_window[i]!),
      alpha: ghostAlpha(i, w),
    });
  }
  const hw = pred.human_window_hand_xy.length;
  for (let i = 0; i < hw; i++) {
    const [y, z] = pred.human_window_hand_xy[i]!;
    scene.ghostHand.push({ xy: [y!, z!], alpha: ghostAlpha(i, hw) });
  }
  for (let j = 3; j < 7; j++) {
    scene.dials.push({ label: `j${j + 1}`, angle: pred.robot_frame[j]! });
  }
  return scene;
}

// Fade from 0.65 down to 0.08 across the window: nearer predictions stronger.
export function ghostAlpha(index: number, length: number): number {
  const frac = length <= 1 ? 0 : index / (length - 1);
  return 0.65 - 0.57 * frac;
}

function statusLine(view: SessionView): string {
  switch (view.connection) {
    case "connecting":
      return "connecting…";
    case "reconnect":
      return "connection lost; retrying";
    case "closed":
      return "session closed";
    case "ready": {
      const action = view.ack?.action ?? "?";
      const lat = view.latencyMs === null ? "" : ` | ${view.latencyMs.toFixed(0)} ms`;
      const stale = view.prediction?.stale ? " | stale input" : "";
      return `${action}${lat}${stale}`;
    }
  }
}

// Canvas painter: meters -> pixels with z up. Kept free of scene logic.
export function paintScene(ctx: CanvasRenderingContext2D, scene: Scene, width: number, height: number): void {
  const scale = Math.min(width, height) / (2.6 * ARM_REACH);
  const cx = width * 0.38;
  const cy = height * 0.58;
  const px = (p: Point): [number, number] => [cx + p[0] * scale, cy - p[1] * scale];

  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);

  for (const ghost of scene.ghostArms) {
    drawChain(ctx, ghost.points.map(px), `rgba(90, 170, 255, ${ghost.alpha})`, 3);
  }
  if (scene.arm) {
    drawChain(ctx, scene.arm.map(px), scene.stale ? "#e0b060" : "#6fe0a8", 6);
  }
  if (scene.ghostHand.length > 1) {
    ctx.beginPath();
    for (let i = 0; i < scene.ghostHand.length; i++) {
      const [x, y] = px(scene.ghostHand[i]!.xy);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.strokeStyle = "rgba(250, 120, 160, 0.5)";
    ctx.lineWidth = 2;
    ctx.stroke();
  }
  if (scene.handTrail.length > 1) {
    ctx.beginPath();
    for (let i = 0; i < scene.handTrail.length; i++) {
      const [x, y] = px(scene.handTrail[i]!);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.strokeStyle = "#f2f2f2";
    ctx.lineWidth = 2;
    ctx.stroke();
  }

  const dialR = 22;
  scene.dials.forEach((dial, i) => {
    const dx = width - 40;
    const dy = 50 + i * 64;
    ctx.beginPath();
    ctx.arc(dx, dy, dialR, 0, 2 * Math.PI);
    ctx.strokeStyle = "#4a5568";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(dx, dy);
    ctx.lineTo(dx + dialR * Math.cos(dial.angle - Math.PI / 2), dy + dialR * Math.sin(dial.angle - Math.PI / 2));
    ctx.strokeStyle = "#6fe0a8";
    ctx.lineWidth = 3;
    ctx.stroke();
    ctx.fillStyle = "#9aa5b1";
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(dial.label, dx, dy + dialR + 14);
  });

  ctx.fillStyle = "#d7dde4";
  ctx.font = "14px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(scene.status, 12, height - 14);
}

function drawChain(ctx: CanvasRenderingContext2D, points: [number, number][], color: string, width: number): void {
  ctx.beginPath();
  for (let i = 0; i < points.length; i++) {
    const [x, y] = points[i]!;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.lineCap = "round";
  ctx.stroke();
  for (const [x, y] of points) {
    ctx.beginPath();
    ctx.arc(x, y, width * 0.9, 0, 2 * Math.PI);
    ctx.fillStyle = color;
    ctx.fill();
  }
}
