/**
 * Pad session lifecycle: register by side, keep the resume token, ride out
 * socket loss. Every outbound envelope carries a strictly increasing
 * sequence number; gestures attempted while offline are discarded, not
 * queued -- a cursor is a live control, and stale input replayed after a
 * reconnect is worse than lost input.
 */

import { Envelope, GestureMsg, RegisterOk, decode, encode, makeEnvelope } from "./wire.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((data: string) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface PadStatus {
  connected: boolean;
  registered: boolean;
  side: string | null;
  active: boolean;
  bound: boolean;
  error: string | null;
}

export interface PadCallbacks {
  onStatus?: (status: PadStatus) => void;
  onPrompt?: (env: Envelope) => void;
}

export class PadClient {
  private socket: SocketLike | null = null;
  private voiceSocket: SocketLike | null = null;
  private seq = 0;
  private voiceSeq = 0;
  session: RegisterOk | null = null;
  status: PadStatus = {
    connected: false,
    registered: false,
    side: null,
    active: false,
    bound: false,
    error: null,
  };
  reconnectDelayMs = 800;

  constructor(
    private socketFactory: SocketFactory,
    private baseUrl: string,
    private side: string | null,
    private callbacks: PadCallbacks = {},
    private scheduler: (fn: () => void, ms: number) => void = (fn, ms) =>
      setTimeout(fn, ms)
  ) {}

  connect(): void {
    const params = new URLSearchParams({ role: "pad" });
    if (this.session) {
      params.set("resume", this.session.resume_token);
    } else if (this.side) {
      params.set("side", this.side);
    }
    const socket = this.socketFactory(`${this.baseUrl}/ws?${params.toString()}`);
    this.socket = socket;
    socket.onopen = () => {
      this.status.connected = true;
      this.emitStatus();
    };
    socket.onmessage = (data) => this.handle(decode(data));
    socket.onclose = () => {
      this.status.connected = false;
      this.emitStatus();
      if (this.status.error === null) {
        this.scheduler(() => this.connect(), this.reconnectDelayMs);
      }
    };
  }

  private handle(env: Envelope): void {
    switch (env.kind) {
      case "register_ok": {
        this.session = env.body as unknown as RegisterOk;
        this.status.registered = true;
        this.status.side = this.session.side;
        this.openVoiceChannel();
        this.emitStatus();
        break;
      }
      case "error": {
        const code = String(env.body.code ?? "");
        if (code === "unknownsidetoken" || code === "sidefull" || code === "unknowntoken") {
          this.status.error = String(env.body.message ?? code);
          this.emitStatus();
        }
        break;
      }
      case "state_diff": {
        const changes = (env.body.changes ?? []) as { op: string; sid?: string; value?: any }[];
        for (const ch of changes) {
          if (ch.op === "session" && ch.sid === this.session?.session_id) {
            this.status.active = !!ch.value.active;
            this.status.bound = !!ch.value.bound;
            this.emitStatus();
          }
        }
        break;
      }
      case "state_snapshot": {
        const me = this.session
          ? (env.body.state as any)?.sessions?.[this.session.session_id]
          : null;
        if (me) {
          this.status.active = !!me.active;
          this.status.bound = !!me.bound;
          this.emitStatus();
        }
        break;
      }
      case "ping": {
        this.sendRaw(makeEnvelope("pong", env.seq, this.sid(), { echo: env.ts }));
        break;
      }
      case "prompt":
        this.callbacks.onPrompt?.(env);
        break;
      default:
        break; // acks and others need no pad-side action
    }
  }

  private sid(): string {
    return this.session?.session_id ?? "pad-unregistered";
  }

  private emitStatus(): void {
    this.callbacks.onStatus?.({ ...this.status });
  }

  private sendRaw(env: Envelope): boolean {
    if (!this.socket || !this.status.connected) {
      return false;
    }
    this.socket.send(encode(env));
    return true;
  }

  /** Send a gesture; returns false when offline (the gesture is dropped). */
  sendGesture(gesture: GestureMsg): boolean {
    if (!this.status.connected || !this.session) {
      return false;
    }
    this.seq += 1;
    return this.sendRaw(
      makeEnvelope("gesture", this.seq, this.session.session_id, { ...gesture })
    );
  }

  /** Voice rides its own socket (`role=voice&sid=...`), opened on registration. */
  private openVoiceChannel(): void {
    if (!this.session) {
      return;
    }
    this.voiceSocket?.close();
    const params = new URLSearchParams({ role: "voice", sid: this.session.session_id });
    const socket = this.socketFactory(`${this.baseUrl}/ws?${params.toString()}`);
    socket.onmessage = (data) => {
      const env = decode(data);
      if (env.kind === "ping") {
        socket.send(encode(makeEnvelope("pong", env.seq, this.sid(), { echo: env.ts })));
      }
    };
    socket.onclose = () => {
      if (this.voiceSocket === socket) {
        this.voiceSocket = null;
      }
    };
    this.voiceSocket = socket;
  }

  /** The text-box stand-in for the voice channel. */
  sendTranscript(transcript: string): boolean {
    if (!this.voiceSocket || !this.session || !transcript) {
      return false;
    }
    this.voiceSeq += 1;
    this.voiceSocket.send(
      encode(makeEnvelope("voice", this.voiceSeq, this.session.session_id, { transcript }))
    );
    return true;
  }

  /** The socket died (or we are simulating it); session survives server-side. */
  dropConnection(): void {
    this.voiceSocket?.close();
    this.socket?.close();
  }
}
