/** Envelope shapes shared by both clients; mirrors the hub's wire contract. */

export const PROTOCOL_VERSION = 1;

export interface Envelope {
  v: number;
  kind: string;
  seq: number;
  sid: string;
  ts: number;
  body: Record<string, unknown>;
}

export interface RegisterOk {
  session_id: string;
  side: "left" | "right";
  resume_token: string;
  epoch: number;
}

export type GestureKind =
  | "move"
  | "tap"
  | "swipe_left"
  | "swipe_right"
  | "swipe_up"
  | "swipe_down"
  | "pinch"
  | "zoom"
  | "double_tap"
  | "long_tap";

export interface GestureMsg {
  gesture: GestureKind;
  dx?: number;
  dy?: number;
  scale?: number;
}

export function makeEnvelope(
  kind: string,
  seq: number,
  sid: string,
  body: Record<string, unknown>,
  ts: number = Date.now()
): Envelope {
  return { v: PROTOCOL_VERSION, kind, seq, sid, ts: Math.floor(ts), body };
}

export function encode(env: Envelope): string {
  return JSON.stringify(env);
}

export function decode(text: string): Envelope {
  const obj = JSON.parse(text);
  if (typeof obj !== "object" || obj === null || obj.v !== PROTOCOL_VERSION) {
    throw new Error("bad envelope");
  }
  return obj as Envelope;
}
