/**
 * Review-queue state: pending cards ordered by event time, a history of
 * finalized verdicts, and the act() path (confirm / override / defer).
 *
 * Optimistic updates always reconcile to server truth: the final label
 * shown in history comes from the server echo, never a local guess, and a
 * NotPending rejection drops the local card (someone else finalized it).
 * Defer is console-local: the card hides and re-queues after a timer while
 * the engine keeps treating the event as pending.
 */

import type { ReviewItemPayload, VerdictPayload } from "./protocol.js";

export type Choice =
  | { kind: "confirm" }
  | { kind: "override"; label: string }
  | { kind: "defer"; delayMs: number };

export interface SubmitRequest {
  event_id: string;
  action: "confirm" | "override";
  label?: string;
  reviewer: string;
}

export interface SubmitAck {
  ok: true;
  payload: VerdictPayload;
}

export interface SubmitError {
  ok: false;
  code: string;
  message: string;
}

export type SubmitResult = SubmitAck | SubmitError;

export interface HistoryEntry {
  eventId: string;
  finalLabel: string;
  flow: string;
  auditSeq: number | null;
}

export type ActStatus =
  | "submitted"
  | "duplicate_ignored"
  | "deferred"
  | "reconciled_not_pending"
  | "error";

export interface ActResult {
  status: ActStatus;
  message?: string;
}

export type Scheduler = (fn: () => void, delayMs: number) => void;

export class ConsoleStore {
  private items = new Map<string, ReviewItemPayload>();
  private deferredItems = new Map<string, ReviewItemPayload>();
  private inFlight = new Set<string>();
  private finalizedIds = new Set<string>();
  readonly history: HistoryEntry[] = [];
  readonly toasts: string[] = [];

  constructor(
    private readonly submit: (req: SubmitRequest) => Promise<SubmitResult>,
    private readonly reviewer: string,
    private readonly schedule: Scheduler = (fn, ms) => void setTimeout(fn, ms),
  ) {}

  applyReviewItem(item: ReviewItemPayload): void {
    if (this.finalizedIds.has(item.event_id)) {
      return; // late push for an already finalized event
    }
    this.items.set(item.event_id, item);
  }

  applyVerdict(payload: VerdictPayload): void {
    const id = payload.event_id;
    if (this.finalizedIds.has(id)) {
      return; // the ack and the feed push both announce the same finalization
    }
    if (payload.final_label !== undefined || payload.decision_flow !== undefined) {
      this.finalizedIds.add(id);
      this.items.delete(id);
      this.deferredItems.delete(id);
      this.history.push({
        eventId: id,
        finalLabel: String(payload.final_label ?? payload.action ?? ""),
        flow: String(payload.decision_flow ?? "ai_final"),
        auditSeq: typeof payload.audit_seq === "number" ? payload.audit_seq : null,
      });
    }
  }

  /** Pending cards ordered by event time (stable on event_id). */
  orderedQueue(): ReviewItemPayload[] {
    return [...this.items.values()].sort(
      (a, b) => a.t_event - b.t_event || a.event_id.localeCompare(b.event_id),
    );
  }

  get emptyState(): string | null {
    return this.items.size === 0 ? "no pending reviews" : null;
  }

  async act(item: ReviewItemPayload, choice: Choice): Promise<ActResult> {
    const id = item.event_id;
    if (choice.kind === "defer") {
      if (!this.items.has(id)) {
        return { status: "error", message: "item is not in the queue" };
      }
      this.deferredItems.set(id, item);
      this.items.delete(id);
      this.schedule(() => {
        const deferred = this.deferredItems.get(id);
        if (deferred !== undefined) {
          this.deferredItems.delete(id);
          this.applyReviewItem(deferred);
        }
      }, choice.delayMs);
      return { status: "deferred" };
    }

    if (this.inFlight.has(id) || this.finalizedIds.has(id)) {
      return { status: "duplicate_ignored" };
    }
    this.inFlight.add(id);
    try {
      const result = await this.submit({
        event_id: id,
        action: choice.kind,
        ...(choice.kind === "override" ? { label: choice.label } : {}),
        reviewer: this.reviewer,
      });
      if (result.ok) {
        this.applyVerdict(result.payload);
        return { status: "submitted" };
      }
      if (result.code === "NotPending") {
        // server truth: someone already finalized this event
        this.finalizedIds.add(id);
        this.items.delete(id);
        this.deferredItems.delete(id);
        this.toasts.push(`event ${id} was already finalized`);
        return { status: "reconciled_not_pending" };
      }
      this.toasts.push(`submission failed: ${result.code}: ${result.message}`);
      return { status: "error", message: result.message };
    } finally {
      this.inFlight.delete(id);
    }
  }
}
