/**
 * Display feed: applies snapshot-then-diffs in revision order, reconnects
 * with a fresh snapshot after socket loss. Diffs older than the current
 * revision are skipped (the hub may resend on the seam); gaps force a
 * resync rather than guessing.
 */

import { Snapshot, applyDiff } from "./model.js";
import { decode, encode, makeEnvelope } from "./wire.js";
import type { SocketFactory, SocketLike } from "./padClient.js";

export interface DisplayCallbacks {
  onModel?: (model: Snapshot) => void;
  onConnection?: (connected: boolean) => void;
}

export class DisplayClient {
  private socket: SocketLike | null = null;
  model: Snapshot | null = null;
  connected = false;

  constructor(
    private socketFactory: SocketFactory,
    private baseUrl: string,
    private callbacks: DisplayCallbacks = {},
    private scheduler: (fn: () => void, ms: number) => void = (fn, ms) =>
      setTimeout(fn, ms),
    public reconnectDelayMs = 1000
  ) {}

  connect(): void {
    const socket = this.socketFactory(`${this.baseUrl}/ws?role=display`);
    this.socket = socket;
    socket.onopen = () => {
      this.connected = true;
      this.callbacks.onConnection?.(true);
    };
    socket.onmessage = (data) => {
      const env = decode(data);
      if (env.kind === "state_snapshot") {
        this.model = env.body.state as unknown as Snapshot;
        this.callbacks.onModel?.(this.model);
      } else if (env.kind === "state_diff" && this.model) {
        const body = env.body as unknown as { revision: number; changes: any[] };
        if (body.revision <= this.model.revision) {
          return; // duplicate on the reconnect seam
        }
        if (body.revision > this.model.revision + 1) {
          this.resync(); // missed something; ask for truth again
          return;
        }
        applyDiff(this.model, body);
        this.callbacks.onModel?.(this.model);
      } else if (env.kind === "ping") {
        socket.send(encode(makeEnvelope("pong", env.seq, "display", { echo: env.ts })));
      }
    };
    socket.onclose = () => {
      this.connected = false;
      this.callbacks.onConnection?.(false);
      this.scheduler(() => this.connect(), this.reconnectDelayMs);
    };
  }

  private resync(): void {
    this.socket?.close(); // reconnect path delivers a fresh snapshot
  }
}
