/**
 * Console facade wiring feed, store and renderers together: connect,
 * authenticate, subscribe, fetch the queue, then keep the rendered queue
 * and history in sync with pushes. A sequence gap or reconnect flips the
 * resync banner on until the next successful queue refetch.
 */

import { FeedClient, type FeedStatus, type Transport } from "./feed.js";
import { asMetrics, asReviewItem, type MetricsSnapshot, type WireMessage } from "./protocol.js";
import { renderReviewCard, type ReviewCardView } from "./render.js";
import { renderMetricsPanel, type MetricsPanelView, type StaleConfig } from "./metrics.js";
import {
  ConsoleStore,
  type ActResult,
  type Choice,
  type SubmitResult,
} from "./store.js";

export interface ConsoleOptions {
  matchId: string;
  reviewer: string;
  token?: string;
}

export class ReviewConsole {
  readonly feed: FeedClient;
  readonly store: ConsoleStore;
  resyncBanner: string | null = null;

  constructor(transport: Transport, private readonly options: ConsoleOptions) {
    this.feed = new FeedClient(transport, {
      onPush: (msg) => this.handlePush(msg),
      onStatus: (status, detail) => this.handleStatus(status, detail),
    });
    this.store = new ConsoleStore(
      (req) => this.submitOverride(req),
      options.reviewer,
    );
  }

  private handlePush(msg: WireMessage): void {
    if (msg.kind === "review_item") {
      this.store.applyReviewItem(asReviewItem(msg.payload));
    } else if (msg.kind === "verdict") {
      this.store.applyVerdict(msg.payload as never);
    }
  }

  private handleStatus(status: FeedStatus, detail?: string): void {
    if (status === "resync") {
      this.resyncBanner = detail ?? "out of sync: refreshing queue";
      void this.refetchQueue().catch(() => undefined);
    } else if (status === "offline" || status === "connecting") {
      this.resyncBanner = detail ?? null;
    }
  }

  private async submitOverride(req: {
    event_id: string;
    action: string;
    label?: string;
    reviewer: string;
  }): Promise<SubmitResult> {
    const response = await this.feed.request("submit_override", req);
    if (response.kind === "error") {
      const payload = response.payload as { code?: string; message?: string };
      return {
        ok: false,
        code: payload.code ?? "Unknown",
        message: payload.message ?? "",
      };
    }
    return { ok: true, payload: response.payload as never };
  }

  async start(): Promise<void> {
    await this.feed.start();
    if (this.options.token !== undefined) {
      await this.feed.request("hello", { token: this.options.token });
    }
    await this.feed.request("subscribe", { resume_from: this.feed.lastServerSeq });
    await this.refetchQueue();
  }

  async refetchQueue(): Promise<void> {
    const response = await this.feed.request("review_queue", {
      match_id: this.options.matchId,
    });
    if (response.kind === "review_queue") {
      const items = (response.payload as { items: Record<string, unknown>[] }).items;
      for (const raw of items) {
        this.store.applyReviewItem(asReviewItem(raw));
      }
      this.resyncBanner = null;
      this.feed.markSynced();
    }
  }

  renderQueue(): ReviewCardView[] {
    return this.store.orderedQueue().map(renderReviewCard);
  }

  act(card: ReviewCardView, choice: Choice): Promise<ActResult> {
    const item = this.store
      .orderedQueue()
      .find((candidate) => candidate.event_id === card.eventId);
    if (item === undefined) {
      return Promise.resolve({ status: "error", message: "card no longer pending" });
    }
    return this.store.act(item, choice);
  }

  async metricsPanel(
    scope: string,
    filters?: Record<string, string>,
    staleness?: StaleConfig,
  ): Promise<MetricsPanelView> {
    const response = await this.feed.request("metrics_snapshot", {
      scope,
      ...(filters !== undefined ? { filters } : {}),
    });
    return renderMetricsPanel(asMetrics(response.payload) as MetricsSnapshot, staleness);
  }

  close(): void {
    this.feed.close();
  }
}
