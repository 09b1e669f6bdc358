/**
 * Metrics panel view model. Numbers displayed equal the snapshot payload
 * verbatim (including the precomputed latency moving-average series); the
 * panel adds only layout plus a stale-data indicator.
 */

import type { MetricsSnapshot } from "./protocol.js";
import { renderBand, renderNumber, type BandBadge, type RenderedNumber } from "./render.js";

export interface MetricsPanelView {
  scope: string;
  eventsTotal: RenderedNumber;
  agreement: RenderedNumber | null;
  kappa: RenderedNumber | null;
  latencyMean: RenderedNumber | null;
  latencyTrend: RenderedNumber[];
  bandCounts: { band: BandBadge; count: RenderedNumber }[];
  disparity: {
    maxGap: RenderedNumber;
    threshold: RenderedNumber;
    flaggedPairs: string[][];
  } | null;
  distribution: { label: string; prob: RenderedNumber }[] | null;
  /** Read-only correct/error decision partitions for replay drills. */
  partition: { correct: string[]; error: string[] } | null;
  scores: { athlete: string; points: RenderedNumber }[];
  pendingReviews: RenderedNumber;
  finalized: RenderedNumber;
  stale: boolean;
  empty: boolean;
}

export interface StaleConfig {
  snapshotAtMs: number;
  nowMs: number;
  maxAgeMs: number;
}

export function renderMetricsPanel(
  snapshot: MetricsSnapshot,
  staleness?: StaleConfig,
): MetricsPanelView {
  const maybe = (value: number | null, source: string): RenderedNumber | null =>
    value === null ? null : renderNumber(value, source);

  const distribution =
    snapshot.event_distribution === null
      ? null
      : snapshot.event_distribution.labels.map((label, i) => ({
          label,
          prob: renderNumber(
            snapshot.event_distribution!.probs[i]!,
            `event_distribution.probs[${i}]`,
          ),
        }));

  return {
    scope: snapshot.scope,
    eventsTotal: renderNumber(snapshot.events_total, "events_total"),
    agreement: maybe(snapshot.agreement, "agreement"),
    kappa: maybe(snapshot.kappa, "kappa"),
    latencyMean: maybe(snapshot.latency_mean_ms, "latency_mean_ms"),
    latencyTrend: snapshot.latency_trend_ms.map((v, i) =>
      renderNumber(v, `latency_trend_ms[${i}]`),
    ),
    bandCounts: Object.entries(snapshot.band_counts).map(([band, count]) => ({
      band: renderBand(band),
      count: renderNumber(count, `band_counts.${band}`),
    })),
    disparity:
      snapshot.disparity === null
        ? null
        : {
            maxGap: renderNumber(snapshot.disparity.max_gap, "disparity.max_gap"),
            threshold: renderNumber(snapshot.disparity.threshold, "disparity.threshold"),
            flaggedPairs: snapshot.disparity.flagged,
          },
    distribution,
    partition:
      snapshot.partition === null
        ? null
        : { correct: [...snapshot.partition.correct], error: [...snapshot.partition.error] },
    scores: Object.entries(snapshot.scores).map(([athlete, points]) => ({
      athlete,
      points: renderNumber(points, `scores.${athlete}`),
    })),
    pendingReviews: renderNumber(snapshot.pending_reviews, "pending_reviews"),
    finalized: renderNumber(snapshot.finalized, "finalized"),
    stale:
      staleness !== undefined && staleness.nowMs - staleness.snapshotAtMs > staleness.maxAgeMs,
    empty: snapshot.events_total === 0,
  };
}

/** Rendered numerics of a metrics panel, for payload snapshot-diff tests. */
export function collectPanelNumbers(panel: MetricsPanelView): RenderedNumber[] {
  const out: RenderedNumber[] = [panel.eventsTotal, panel.pendingReviews, panel.finalized];
  for (const maybe of [panel.agreement, panel.kappa, panel.latencyMean]) {
    if (maybe !== null) {
      out.push(maybe);
    }
  }
  out.push(...panel.latencyTrend);
  out.push(...panel.bandCounts.map((b) => b.count));
  if (panel.disparity !== null) {
    out.push(panel.disparity.maxGap, panel.disparity.threshold);
  }
  if (panel.distribution !== null) {
    out.push(...panel.distribution.map((d) => d.prob));
  }
  out.push(...panel.scores.map((s) => s.points));
  return out;
}
