/**
 * Live feed client: one persistent NDJSON connection carrying both
 * request/response exchanges and server pushes (review_item / verdict).
 *
 * Per-direction sequence numbers strictly increase; a gap in the server's
 * sequence raises the resync banner and triggers a full review-queue
 * refetch (the gateway does not replay missed pushes, so resume after a
 * gap or reconnect means re-reading queue state, which is authoritative).
 */

import type { WireMessage } from "./protocol.js";

export interface Connection {
  send(msg: WireMessage): void;
  onMessage(cb: (msg: WireMessage) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export interface Transport {
  connect(): Promise<Connection>;
}

export type FeedStatus = "connecting" | "live" | "resync" | "offline";

export interface FeedHandlers {
  onPush(msg: WireMessage): void;
  onStatus?(status: FeedStatus, detail?: string): void;
}

const PUSH_KINDS = new Set(["review_item", "verdict"]);

export class FeedClient {
  status: FeedStatus = "offline";
  lastServerSeq = 0;
  private conn: Connection | null = null;
  private outSeq = 0;
  private pending: Array<{
    resolve: (msg: WireMessage) => void;
    reject: (err: Error) => void;
  }> = [];
  private closedByUser = false;

  constructor(
    private readonly transport: Transport,
    private readonly handlers: FeedHandlers,
    private readonly reconnectDelayMs = 250,
    private readonly schedule: (fn: () => void, ms: number) => void = (fn, ms) =>
      void setTimeout(fn, ms),
  ) {}

  private setStatus(status: FeedStatus, detail?: string): void {
    this.status = status;
    this.handlers.onStatus?.(status, detail);
  }

  async start(): Promise<void> {
    this.closedByUser = false;
    await this.connect();
  }

  private async connect(): Promise<void> {
    this.setStatus("connecting");
    this.conn = await this.transport.connect();
    this.outSeq = 0;
    this.lastServerSeq = 0; // per-connection sequence restarts with the stream
    this.conn.onMessage((msg) => this.handleMessage(msg));
    this.conn.onClose(() => this.handleClose());
    this.setStatus("live");
  }

  private handleClose(): void {
    this.conn = null;
    for (const waiter of this.pending.splice(0)) {
      waiter.reject(new Error("connection closed"));
    }
    if (this.closedByUser) {
      this.setStatus("offline");
      return;
    }
    this.setStatus("connecting", "reconnecting");
    this.schedule(() => {
      void this.connect()
        .then(() => this.setStatus("resync", "reconnected: refetch queue state"))
        .catch(() => this.handleClose());
    }, this.reconnectDelayMs);
  }

  private handleMessage(msg: WireMessage): void {
    if (msg.seq !== this.lastServerSeq + 1) {
      this.setStatus(
        "resync",
        `sequence gap: expected ${this.lastServerSeq + 1}, got ${msg.seq}`,
      );
    }
    this.lastServerSeq = msg.seq;
    // responses use distinct kinds (ack/review_queue/metrics/audit/error),
    // so pushes never satisfy a pending request
    if (PUSH_KINDS.has(msg.kind)) {
      this.handlers.onPush(msg);
      return;
    }
    const waiter = this.pending.shift();
    if (waiter !== undefined) {
      waiter.resolve(msg);
    }
  }

  /** Mark the console as caught up after a queue refetch. */
  markSynced(): void {
    this.setStatus("live");
  }

  request(kind: string, payload: Record<string, unknown>): Promise<WireMessage> {
    if (this.conn === null) {
      return Promise.reject(new Error("not connected"));
    }
    this.outSeq += 1;
    const msg: WireMessage = { kind, payload, seq: this.outSeq };
    const promise = new Promise<WireMessage>((resolve, reject) => {
      this.pending.push({ resolve, reject });
    });
    this.conn.send(msg);
    return promise;
  }

  close(): void {
    this.closedByUser = true;
    this.conn?.close();
  }
}
