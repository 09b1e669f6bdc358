/**
 * Console contract against the recorded gateway session: every rendered
 * numeric must equal the corresponding wire payload field verbatim.
 */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { collectPanelNumbers, renderMetricsPanel } from "../src/metrics.js";
import { asMetrics, asReviewItem, type WireMessage } from "../src/protocol.js";
import { collectNumbers, renderReviewCard } from "../src/render.js";

interface Fixture {
  match_id: string;
  observer_feed: WireMessage[];
  actor_exchanges: { request: WireMessage; response: WireMessage }[];
}

const fixture: Fixture = JSON.parse(
  readFileSync(new URL("./fixtures/session.json", import.meta.url), "utf-8"),
);

function reviewItemPayloads(): Record<string, unknown>[] {
  const fromFeed = fixture.observer_feed
    .filter((m) => m.kind === "review_item")
    .map((m) => m.payload);
  const queueResponse = fixture.actor_exchanges.find(
    (e) => e.request.kind === "review_queue",
  );
  const fromQueue = (queueResponse?.response.payload as { items: Record<string, unknown>[] })
    .items;
  return [...fromFeed, ...fromQueue];
}

describe("recorded session contract", () => {
  it("contains pushed review items and a queue response", () => {
    expect(reviewItemPayloads().length).toBeGreaterThanOrEqual(3);
  });

  it("renders every review-card numeric verbatim from the payload", () => {
    for (const payload of reviewItemPayloads()) {
      const card = renderReviewCard(asReviewItem(payload));
      for (const rendered of collectNumbers(card)) {
        expect(rendered.source in payload, `field ${rendered.source} on wire`).toBe(true);
        if (rendered.source === "t_w" || rendered.source === "tau") {
          // threshold markers also arrive in the payload
          expect(rendered.text).toBe(String(payload[rendered.source]));
        } else {
          expect(rendered.text).toBe(String(payload[rendered.source]));
          expect(rendered.value).toBe(payload[rendered.source]);
        }
      }
      // explanation string is shown untouched
      expect(card.explanation).toBe(payload["explanation"]);
    }
  });

  it("renders every metrics-panel numeric verbatim from the snapshot", () => {
    const exchange = fixture.actor_exchanges.find(
      (e) => e.request.kind === "metrics_snapshot",
    );
    expect(exchange).toBeDefined();
    const snapshot = exchange!.response.payload;
    const panel = renderMetricsPanel(asMetrics(snapshot));
    const lookup = (path: string): unknown => {
      let node: unknown = snapshot;
      for (const part of path.split(".")) {
        const m = /^(.*)\[(\d+)\]$/.exec(part);
        if (m) {
          node = (node as Record<string, unknown>)[m[1]!];
          node = (node as unknown[])[Number(m[2]!)];
        } else {
          node = (node as Record<string, unknown>)[part];
        }
      }
      return node;
    };
    const numbers = collectPanelNumbers(panel);
    expect(numbers.length).toBeGreaterThan(0);
    for (const rendered of numbers) {
      expect(rendered.text, rendered.source).toBe(String(lookup(rendered.source)));
    }
  });

  it("observer feed sequence is strictly increasing", () => {
    let last = 0;
    for (const msg of fixture.observer_feed) {
      expect(msg.seq).toBeGreaterThan(last);
      last = msg.seq;
    }
  });

  it("double submission was rejected with NotPending", () => {
    const submits = fixture.actor_exchanges.filter(
      (e) => e.request.kind === "submit_override",
    );
    expect(submits.length).toBe(2);
    expect(submits[0]!.response.kind).toBe("ack");
    expect(submits[1]!.response.kind).toBe("error");
    expect((submits[1]!.response.payload as { code: string }).code).toBe("NotPending");
  });

  it("exactly one finalized verdict exists per event in the audit export", () => {
    const exportExchange = fixture.actor_exchanges.find(
      (e) => e.request.kind === "audit_export",
    );
    const lines = (exportExchange!.response.payload as { lines: string[] }).lines;
    const finals = new Map<string, number>();
    for (const line of lines) {
      const record = JSON.parse(line) as { event_id: string; decision_flow: string };
      if (record.decision_flow !== "deferred") {
        finals.set(record.event_id, (finals.get(record.event_id) ?? 0) + 1);
      }
    }
    for (const [eventId, count] of finals) {
      expect(count, `event ${eventId}`).toBe(1);
    }
    expect((exportExchange!.response.payload as { verified: boolean }).verified).toBe(true);
  });
});
