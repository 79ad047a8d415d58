// Typed mirror of the socket protocol plus runtime validation against the
// shared schema fixture. The client never sends or renders a message that
// fails validation.
import { Ajv2020, type ValidateFunction } from "ajv/dist/2020.js";
import schema from "../schema/messages.schema.json" with { type: "json" };

export const PROTOCOL_VERSION = 1;
export const ACTIONS = ["hand_shake", "hand_wave", "parachute", "rocket"] as const;
export type Action = (typeof ACTIONS)[number];

export interface HelloMsg {
  type: "hello";
  protocol: number;
  action: Action;
}
export interface FrameMsg {
  type: "frame";
  t_ms: number;
  hand_xy: [number, number];
}
export interface ByeMsg {
  type: "bye";
}
export interface HelloAckMsg {
  type: "hello_ack";
  protocol: 1;
  w: number;
  robot_dims: 7;
  action?: Action;
}
export interface PredictionMsg {
  type: "prediction";
  t_ms: number;
  robot_frame: number[];
  robot_window: number[][];
  human_window_hand_xy: number[][];
  stale: boolean;
}
export interface ErrorMsg {
  type: "error";
  msg: string;
}
export type ClientMessage = HelloMsg | FrameMsg | ByeMsg;
export type ServerMessage = HelloAckMsg | PredictionMsg | ErrorMsg;

const ajv = new Ajv2020({ allErrors: false });
const defs = (schema as { $defs: Record<string, object> }).$defs;

function compile(name: "client_message" | "server_message"): ValidateFunction {
  return ajv.compile({ $defs: defs, $ref: `#/$defs/${name}` });
}

const validators = {
  client: compile("client_message"),
  server: compile("server_message"),
};

export function validateMessage(msg: unknown, direction: "client" | "server"): string | null {
  const validate = validators[direction];
  if (validate(msg)) return null;
  const err = validate.errors?.[0];
  return err ? `${err.instancePath || "/"}: ${err.message ?? "invalid"}` : "invalid";
}

export function parseServerMessage(text: string): ServerMessage {
  let msg: unknown;
  try {
    msg = JSON.parse(text);
  } catch {
    throw new Error("server sent invalid JSON");
  }
  const problem = validateMessage(msg, "server");
  if (problem !== null) throw new Error(`server message failed validation; ${problem}`);
  return msg as ServerMessage;
}

export function encodeClientMessage(msg: ClientMessage): string {
  const problem = validateMessage(msg, "client");
  if (problem !== null) throw new Error(`refusing to send invalid message; ${problem}`);
  return JSON.stringify(msg);
}
