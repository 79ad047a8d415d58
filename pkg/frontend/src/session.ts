// Client session: hello handshake, 40 Hz frame stream, prediction intake,
// reconnect with backoff. The socket is injected so tests can drive the
// state machine without a browser.
import { FrameResampler } from "./resample.js";
import {
  PROTOCOL_VERSION,
  encodeClientMessage,
  parseServerMessage,
  type Action,
  type ServerMessage,
} from "./protocol.js";
import type { ConnectionState, SessionView } from "./scene.js";
import type { Point } from "./fk.js";

// The subset of the WebSocket API the session uses; browser WebSocket and
// the "ws" package both satisfy it.
export interface SocketLike {
  send(data: string): void;
  close(code?: number): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const TRAIL_LEN = 48;
const RECONNECT_MS = 1000;

export class LiveSession {
  readonly url: string;
  action: Action;
  onUpdate: (view: SessionView) => void = () => {};
  onProtocolError: (reason: string) => void = () => {};

  private makeSocket: SocketFactory;
  private socket: SocketLike | null = null;
  private stopped = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private resampler = new FrameResampler();
  private sendTimes = new Map<number, number>(); // t_ms -> wall clock at send
  private view: SessionView = {
    connection: "connecting",
    ack: null,
    prediction: null,
    handTrail: [],
    latencyMs: null,
  };

  constructor(url: string, action: Action, makeSocket: SocketFactory) {
    this.url = url;
    this.action = action;
    this.makeSocket = makeSocket;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    if (this.socket !== null) {
      try {
        this.socket.send(encodeClientMessage({ type: "bye" }));
      } catch {
        // closing anyway
      }
      this.socket.close(1000);
      this.socket = null;
    }
    this.setConnection("closed");
  }

  currentView(): SessionView {
    return this.view;
  }

  // Raw pointer sample in meters; actual frames go out on the 25 ms grid.
  pushHand(eventMs: number, xy: Point): void {
    this.resampler.push(eventMs, xy);
  }

  // Emit all frames due by now_ms. Call from a timer faster than 40 Hz.
  flush(nowMs: number): void {
    if (this.socket === null || this.view.connection !== "ready") return;
    for (const out of this.resampler.flushTo(nowMs)) {
      this.socket.send(encodeClientMessage(out.msg));
      this.sendTimes.set(out.msg.t_ms, nowMs);
      if (this.sendTimes.size > 400) {
        const oldest = this.sendTimes.keys().next().value!;
        this.sendTimes.delete(oldest);
      }
      this.view.handTrail.push([out.msg.hand_xy[0]!, out.msg.hand_xy[1]!]);
      if (this.view.handTrail.length > TRAIL_LEN) this.view.handTrail.shift();
    }
  }

  private connect(): void {
    this.setConnection("connecting");
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => {
      sock.send(
        encodeClientMessage({ type: "hello", protocol: PROTOCOL_VERSION, action: this.action })
      );
    };
    sock.onmessage = (ev) => this.handleMessage(String(ev.data));
    sock.onclose = () => this.handleDrop();
    sock.onerror = () => this.handleDrop();
  }

  private handleMessage(text: string): void {
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(text);
    } catch (err) {
      this.onProtocolError(String(err));
      return;
    }
    if (msg.type === "hello_ack") {
      this.view.ack = msg;
      this.setConnection("ready");
    } else if (msg.type === "prediction") {
      this.view.prediction = msg;
      const sent = this.sendTimes.get(msg.t_ms);
      if (sent !== undefined) {
        this.view.latencyMs = performanceNow() - sent;
        this.sendTimes.delete(msg.t_ms);
      }
      this.onUpdate(this.view);
    } else {
      this.onProtocolError(msg.msg);
    }
  }

  private handleDrop(): void {
    if (this.stopped || this.socket === null) return;
    this.socket = null;
    this.setConnection("reconnect");
    this.resampler = new FrameResampler(); // fresh time origin for the new session
    this.sendTimes.clear();
    this.reconnectTimer = setTimeout(() => this.connect(), RECONNECT_MS);
  }

  private setConnection(state: ConnectionState): void {
    this.view.connection = state;
    this.onUpdate(this.view);
  }
}

function performanceNow(): number {
  return typeof performance !== "undefined" ? performance.now() : Date.now();
}
