/**
 * Pure view-model renderers. Every numeric shown on screen is a
 * RenderedNumber whose `text` is the verbatim string form of a wire payload
 * field and whose `source` names that field, so contract tests can diff the
 * rendered surface against the payload mechanically.
 *
 * The console performs zero decision math: bars, gauges and badges are
 * layout only; thresholds and bounds come straight from the payload.
 */

import type { ReviewItemPayload } from "./protocol.js";

export interface RenderedNumber {
  text: string;
  value: number;
  source: string;
}

export interface BarView {
  lo: RenderedNumber;
  hi: RenderedNumber;
  marker: RenderedNumber;
  markerLabel: string;
  ascii: string;
  state: "below" | "crossing" | "above";
}

export interface BandBadge {
  value: string;
  label: string; // text label always present: color is never the only signal
  color: string;
}

export interface SaliencyGridView {
  joints: number;
  frames: number;
  rows: string[][] | null;
}

export interface ReviewCardView {
  eventId: string;
  tEvent: RenderedNumber;
  athlete: string | null;
  eventType: string | null;
  explanation: string;
  impactBar: BarView;
  validityBar: BarView;
  entropy: RenderedNumber;
  entropyGauge: string;
  band: BandBadge;
  saliency: SaliencyGridView | null;
  clipUrl: string | null;
}

const BAND_COLORS: Record<string, string> = {
  green: "#1db954",
  yellow: "#f5a623",
  red: "#e03131",
};

export function renderNumber(value: number, source: string): RenderedNumber {
  return { text: String(value), value, source };
}

export function renderBand(band: string): BandBadge {
  return {
    value: band,
    label: band, // explicit text so the badge is readable without color
    color: BAND_COLORS[band] ?? "#888888",
  };
}

const BAR_WIDTH = 32;

/** ASCII interval bar: '=' spans [lo, hi], '|' marks the threshold. */
export function renderBar(
  lo: number,
  hi: number,
  marker: number,
  sources: { lo: string; hi: string; marker: string },
): BarView {
  const axisLo = Math.min(lo, marker);
  const axisHi = Math.max(hi, marker);
  const span = axisHi - axisLo || 1;
  const pad = span * 0.15;
  const min = axisLo - pad;
  const max = axisHi + pad;
  const cell = (x: number): number => {
    const raw = Math.floor(((x - min) / (max - min)) * BAR_WIDTH);
    return Math.min(Math.max(raw, 0), BAR_WIDTH - 1);
  };

  const chars: string[] = new Array<string>(BAR_WIDTH).fill(" ");
  for (let i = cell(lo); i <= cell(hi); i++) {
    chars[i] = "=";
  }
  chars[cell(marker)] = "|";

  let state: BarView["state"];
  if (hi < marker) {
    state = "below";
  } else if (lo >= marker) {
    state = "above";
  } else {
    state = "crossing";
  }

  return {
    lo: renderNumber(lo, sources.lo),
    hi: renderNumber(hi, sources.hi),
    marker: renderNumber(marker, sources.marker),
    markerLabel: String(marker),
    ascii: `[${chars.join("")}]`,
    state,
  };
}

const GAUGE_WIDTH = 12;
const MAX_ENTROPY_DISPLAY = 1.6; // display clamp only; the number is verbatim

export function renderEntropyGauge(entropyNats: number): string {
  const frac = Math.min(Math.max(entropyNats / MAX_ENTROPY_DISPLAY, 0), 1);
  const filled = Math.round(frac * GAUGE_WIDTH);
  return `(${"#".repeat(filled)}${".".repeat(GAUGE_WIDTH - filled)})`;
}

const SALIENCY_SHADES = [" ", ".", ":", "*", "#"];

export function renderSaliencyGrid(
  saliency: { joints: number; frames: number; values: number[][] | null } | null,
): SaliencyGridView | null {
  if (saliency === null) {
    return null;
  }
  if (saliency.values === null) {
    return { joints: saliency.joints, frames: saliency.frames, rows: null };
  }
  let peak = 0;
  for (const row of saliency.values) {
    for (const v of row) {
      peak = Math.max(peak, v);
    }
  }
  const rows = saliency.values.map((row) =>
    row.map((v) => {
      const idx = peak > 0 ? Math.round((v / peak) * (SALIENCY_SHADES.length - 1)) : 0;
      return SALIENCY_SHADES[idx] ?? " ";
    }),
  );
  return { joints: saliency.joints, frames: saliency.frames, rows };
}

export function renderReviewCard(item: ReviewItemPayload): ReviewCardView {
  return {
    eventId: item.event_id,
    tEvent: renderNumber(item.t_event, "t_event"),
    athlete: item.athlete_id,
    eventType: item.event_type,
    explanation: item.explanation,
    impactBar: renderBar(item.impact_lo, item.impact_hi, item.t_w, {
      lo: "impact_lo",
      hi: "impact_hi",
      marker: "t_w",
    }),
    validityBar: renderBar(item.p_lo, item.p_hi, item.tau, {
      lo: "p_lo",
      hi: "p_hi",
      marker: "tau",
    }),
    entropy: renderNumber(item.entropy_nats, "entropy_nats"),
    entropyGauge: renderEntropyGauge(item.entropy_nats),
    band: renderBand(item.band),
    saliency: renderSaliencyGrid(item.saliency),
    clipUrl: item.clip_url ?? null,
  };
}

/** All rendered numerics of a card, for payload snapshot-diff tests. */
export function collectNumbers(card: ReviewCardView): RenderedNumber[] {
  return [
    card.tEvent,
    card.impactBar.lo,
    card.impactBar.hi,
    card.impactBar.marker,
    card.validityBar.lo,
    card.validityBar.hi,
    card.validityBar.marker,
    card.entropy,
  ];
}
