// Mouse samples arrive at display rate; the wire wants exactly 40 Hz.
// Frames fall on a fixed 25 ms grid anchored at the first sample; each is
// linearly interpolated between the two samples that straddle it. During
// pauses the last position repeats, flagged `held` locally (the wire
// message carries no flag).
import type { FrameMsg } from "./protocol.js";

export const FRAME_HZ = 40;
export const FRAME_MS = 1000 / FRAME_HZ;

export interface OutgoingFrame {
  msg: FrameMsg;
  held: boolean;
}

interface Sample {
  t: number;
  xy: [number, number];
}

export class FrameResampler {
  private samples: Sample[] = [];
  private t0: number | null = null;
  private nextIndex = 0;

  // Feed one mouse sample; frames only leave through flushTo.
  push(t_ms: number, xy: [number, number]): void {
    const last = this.samples[this.samples.length - 1];
    if (last && t_ms <= last.t) return; // out-of-order or duplicate event
    this.samples.push({ t: t_ms, xy: [xy[0], xy[1]] });
    if (this.t0 === null) this.t0 = t_ms;
  }

  // Timer tick: emit every frame due by now_ms.
  flushTo(now_ms: number): OutgoingFrame[] {
    if (this.t0 === null) return [];
    return this.drain(now_ms);
  }

  private frameTime(index: number): number {
    return Math.round(this.t0! + index * FRAME_MS);
  }

  private drain(until_ms: number): OutgoingFrame[] {
    const out: OutgoingFrame[] = [];
    while (this.frameTime(this.nextIndex) <= until_ms) {
      const t = this.frameTime(this.nextIndex);
      const held = t > this.samples[this.samples.length - 1]!.t;
      out.push({ msg: { type: "frame", t_ms: t, hand_xy: this.interpolate(t) }, held });
      this.nextIndex += 1;
    }
    // keep only the samples still needed for future interpolation
    const horizon = this.frameTime(this.nextIndex);
    while (this.samples.length > 2 && this.samples[1]!.t <= horizon) this.samples.shift();
    return out;
  }

  private interpolate(t: number): [number, number] {
    const samples = this.samples;
    const last = samples[samples.length - 1]!;
    if (t >= last.t) return [last.xy[0], last.xy[1]]; // at or past the newest sample: hold it
    let lo = samples[0]!;
    for (const s of samples) {
      if (s.t >= t) {
        if (s.t === lo.t) return [s.xy[0], s.xy[1]];
        const a = (t - lo.t) / (s.t - lo.t);
        return [lo.xy[0] + a * (s.xy[0] - lo.xy[0]), lo.xy[1] + a * (s.xy[1] - lo.xy[1])];
      }
      lo = s;
    }
    return [last.xy[0], last.xy[1]];
  }
}
