import { describe, expect, it } from "vitest";

import type { ReviewItemPayload } from "../src/protocol.js";
import {
  ConsoleStore,
  type SubmitRequest,
  type SubmitResult,
} from "../src/store.js";

function item(id: string, tEvent: number): ReviewItemPayload {
  return {
    event_id: id,
    t_event: tEvent,
    athlete_id: "KOR_A123",
    event_type: "head_kick",
    explanation: "impact lower bound 62.1 below threshold 65",
    impact_lo: 62.1,
    impact_hi: 69.4,
    p_lo: 0.71,
    p_hi: 0.76,
    t_w: 65,
    tau: 0.7,
    band: "yellow",
    entropy_nats: 0.6,
    saliency: null,
  };
}

interface ScriptedServer {
  store: ConsoleStore;
  requests: SubmitRequest[];
}

function storeWithServer(
  results: SubmitResult[],
  schedule?: (fn: () => void, ms: number) => void,
): ScriptedServer {
  const requests: SubmitRequest[] = [];
  const queue = [...results];
  const store = new ConsoleStore(
    async (req) => {
      requests.push(req);
      const next = queue.shift();
      if (next === undefined) {
        throw new Error("no scripted result left");
      }
      return next;
    },
    "jury_chair",
    schedule ?? ((fn) => fn()),
  );
  return { store, requests };
}

const ackFor = (id: string, flow = "human_confirm"): SubmitResult => ({
  ok: true,
  payload: { event_id: id, final_label: "no_award", decision_flow: flow, audit_seq: 9 },
});

const notPending: SubmitResult = {
  ok: false,
  code: "NotPending",
  message: "already finalized",
};

describe("queue ordering", () => {
  it("orders by event time", () => {
    const { store } = storeWithServer([]);
    store.applyReviewItem(item("b", 200));
    store.applyReviewItem(item("a", 100));
    store.applyReviewItem(item("c", 300));
    expect(store.orderedQueue().map((i) => i.event_id)).toEqual(["a", "b", "c"]);
  });

  it("shows the empty state with no pending reviews", () => {
    const { store } = storeWithServer([]);
    expect(store.emptyState).toBe("no pending reviews");
    store.applyReviewItem(item("a", 1));
    expect(store.emptyState).toBeNull();
  });
});

describe("act: confirm and override", () => {
  it("confirm moves the card to history with the server flow badge", async () => {
    const { store } = storeWithServer([ackFor("a")]);
    store.applyReviewItem(item("a", 1));
    const result = await store.act(store.orderedQueue()[0]!, { kind: "confirm" });
    expect(result.status).toBe("submitted");
    expect(store.orderedQueue()).toEqual([]);
    expect(store.history).toHaveLength(1);
    expect(store.history[0]).toMatchObject({
      eventId: "a",
      finalLabel: "no_award",
      flow: "human_confirm",
    });
  });

  it("override shows the final label from the server echo, not a local guess", async () => {
    const { store, requests } = storeWithServer([
      {
        ok: true,
        payload: {
          event_id: "a",
          final_label: "no_point",
          decision_flow: "human_override",
          audit_seq: 3,
        },
      },
    ]);
    store.applyReviewItem(item("a", 1));
    await store.act(store.orderedQueue()[0]!, { kind: "override", label: "no_point" });
    expect(requests[0]).toMatchObject({ action: "override", label: "no_point" });
    expect(store.history[0]!.finalLabel).toBe("no_point");
  });

  it("double-click: the second submission is rejected locally, one verdict remains", async () => {
    const { store, requests } = storeWithServer([ackFor("a")]);
    store.applyReviewItem(item("a", 1));
    const card = store.orderedQueue()[0]!;
    const [first, second] = await Promise.all([
      store.act(card, { kind: "confirm" }),
      store.act(card, { kind: "confirm" }),
    ]);
    const statuses = [first.status, second.status].sort();
    expect(statuses).toEqual(["duplicate_ignored", "submitted"]);
    expect(requests).toHaveLength(1);
    expect(store.history).toHaveLength(1);
  });

  it("NotPending reconciles to server truth without a local verdict", async () => {
    const { store } = storeWithServer([notPending]);
    store.applyReviewItem(item("a", 1));
    const result = await store.act(store.orderedQueue()[0]!, { kind: "confirm" });
    expect(result.status).toBe("reconciled_not_pending");
    expect(store.orderedQueue()).toEqual([]); // card dropped
    expect(store.history).toEqual([]); // no invented final label
    expect(store.toasts.some((t) => t.includes("already finalized"))).toBe(true);
  });

  it("errors surface as toasts, never silent drops", async () => {
    const { store } = storeWithServer([
      { ok: false, code: "UnknownEvent", message: "never ingested" },
    ]);
    store.applyReviewItem(item("a", 1));
    const result = await store.act(store.orderedQueue()[0]!, { kind: "confirm" });
    expect(result.status).toBe("error");
    expect(store.toasts).toHaveLength(1);
    expect(store.orderedQueue()).toHaveLength(1); // still pending
  });
});

describe("act: defer", () => {
  it("re-queues the card after the timer while the engine stays untouched", async () => {
    const timers: Array<() => void> = [];
    const { store, requests } = storeWithServer([], (fn) => void timers.push(fn));
    store.applyReviewItem(item("a", 1));
    const result = await store.act(store.orderedQueue()[0]!, {
      kind: "defer",
      delayMs: 30_000,
    });
    expect(result.status).toBe("deferred");
    expect(store.orderedQueue()).toEqual([]); // hidden while deferred
    expect(requests).toHaveLength(0); // no message to the gateway
    timers.forEach((fire) => fire());
    expect(store.orderedQueue().map((i) => i.event_id)).toEqual(["a"]);
  });

  it("a verdict arriving during deferral wins over the timer", async () => {
    const timers: Array<() => void> = [];
    const { store } = storeWithServer([], (fn) => void timers.push(fn));
    store.applyReviewItem(item("a", 1));
    await store.act(store.orderedQueue()[0]!, { kind: "defer", delayMs: 1000 });
    store.applyVerdict({ event_id: "a", final_label: "no_award", decision_flow: "human_confirm" });
    timers.forEach((fire) => fire());
    expect(store.orderedQueue()).toEqual([]); // finalized elsewhere, stays gone
    expect(store.history).toHaveLength(1);
  });
});

describe("feed pushes", () => {
  it("late review_item for a finalized event is ignored", () => {
    const { store } = storeWithServer([]);
    store.applyVerdict({ event_id: "a", final_label: "no_award", decision_flow: "human_confirm" });
    store.applyReviewItem(item("a", 1));
    expect(store.orderedQueue()).toEqual([]);
  });
});
