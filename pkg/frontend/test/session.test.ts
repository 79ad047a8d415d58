import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { LiveSession, type SocketLike } from "../src/session.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.closed = true;
  }
  open(): void {
    this.onopen?.();
  }
  receive(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
  drop(): void {
    this.onclose?.();
  }
}

function ack() {
  return { type: "hello_ack", protocol: 1, w: 40, robot_dims: 7, action: "hand_shake" };
}

function prediction(t_ms: number) {
  return {
    type: "prediction",
    t_ms,
    robot_frame: [0, 0, 0, 0, 0, 0, 0],
    robot_window: [[0, 0, 0, 0, 0, 0, 0]],
    human_window_hand_xy: [[0, 0]],
    stale: false,
  };
}

describe("live session state machine", () => {
  let sockets: FakeSocket[];
  let session: LiveSession;

  beforeEach(() => {
    vi.useFakeTimers();
    sockets = [];
    session = new LiveSession("ws://test/ws", "hand_shake", () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("sends a schema-valid hello on open and becomes ready on the ack", () => {
    session.start();
    expect(session.currentView().connection).toBe("connecting");
    sockets[0]!.open();
    expect(JSON.parse(sockets[0]!.sent[0]!)).toEqual({
      type: "hello",
      protocol: 1,
      action: "hand_shake",
    });
    sockets[0]!.receive(ack());
    expect(session.currentView().connection).toBe("ready");
    expect(session.currentView().ack?.w).toBe(40);
  });

  it("streams 40 Hz frames only once the session is ready", () => {
    session.start();
    sockets[0]!.open();
    session.pushHand(0, [0.1, 0.2]);
    session.flush(100);
    expect(sockets[0]!.sent).toHaveLength(1); // hello only: not ready yet
    sockets[0]!.receive(ack());
    session.pushHand(30, [0.2, 0.3]);
    session.flush(100);
    const frames = sockets[0]!.sent.slice(1).map((s) => JSON.parse(s));
    expect(frames.length).toBe(5); // grid 0,25,50,75,100
    expect(frames.every((f) => f.type === "frame")).toBe(true);
    for (let i = 1; i < frames.length; i++) {
      expect(frames[i].t_ms).toBeGreaterThan(frames[i - 1].t_ms);
    }
    expect(session.currentView().handTrail.length).toBe(5);
  });

  it("applies predictions to the view and estimates latency", () => {
    const updates: string[] = [];
    session.onUpdate = (v) => updates.push(v.connection);
    session.start();
    sockets[0]!.open();
    sockets[0]!.receive(ack());
    session.pushHand(0, [0, 0]);
    session.flush(0);
    sockets[0]!.receive(prediction(0));
    const view = session.currentView();
    expect(view.prediction?.t_ms).toBe(0);
    expect(view.latencyMs).not.toBeNull();
    expect(updates.length).toBeGreaterThan(0);
  });

  it("routes protocol violations to the error hook, not the view", () => {
    const problems: string[] = [];
    session.onProtocolError = (r) => problems.push(r);
    session.start();
    sockets[0]!.open();
    sockets[0]!.receive(ack());
    sockets[0]!.receive({ type: "prediction", t_ms: -1 }); // malformed
    sockets[0]!.receive({ type: "error", msg: "boom" }); // server-reported error
    expect(problems).toHaveLength(2);
    expect(session.currentView().prediction).toBeNull();
  });

  it("reconnects with a fresh resampler after a drop", () => {
    session.start();
    sockets[0]!.open();
    sockets[0]!.receive(ack());
    session.pushHand(0, [0, 0]);
    session.flush(50);
    sockets[0]!.drop();
    expect(session.currentView().connection).toBe("reconnect");
    vi.advanceTimersByTime(1100);
    expect(sockets).toHaveLength(2);
    sockets[1]!.open();
    sockets[1]!.receive(ack());
    expect(session.currentView().connection).toBe("ready");
    // buffered pre-drop frames were discarded; new stream restarts its grid
    session.pushHand(5000, [1, 1]);
    session.flush(5000);
    const frames = sockets[1]!.sent.slice(1).map((s) => JSON.parse(s));
    expect(frames).toHaveLength(1);
    expect(frames[0].t_ms).toBe(5000);
  });

  it("says bye and closes cleanly on stop", () => {
    session.start();
    sockets[0]!.open();
    sockets[0]!.receive(ack());
    session.stop();
    expect(sockets[0]!.closed).toBe(true);
    expect(JSON.parse(sockets[0]!.sent.at(-1)!)).toEqual({ type: "bye" });
    expect(session.currentView().connection).toBe("closed");
    sockets[0]!.drop(); // late close event must not trigger a reconnect
    vi.advanceTimersByTime(5000);
    expect(sockets).toHaveLength(1);
  });
});
