/**
 * Wire protocol spoken with the scoring gateway: newline-delimited JSON
 * messages `{kind, payload, seq}` with seq strictly increasing per
 * connection per direction. The console renders payload fields verbatim
 * and never computes verdicts locally.
 */

export interface WireMessage {
  kind: string;
  payload: Record<string, unknown>;
  seq: number;
}

export interface ReviewItemPayload {
  event_id: string;
  t_event: number;
  athlete_id: string | null;
  event_type: string | null;
  explanation: string;
  impact_lo: number;
  impact_hi: number;
  p_lo: number;
  p_hi: number;
  t_w: number;
  tau: number;
  band: string;
  entropy_nats: number;
  saliency: { joints: number; frames: number; values: number[][] | null } | null;
  clip_url?: string | null;
}

export interface VerdictPayload {
  event_id: string;
  final_label?: string;
  action?: string;
  decision_flow?: string;
  audit_seq?: number;
  [key: string]: unknown;
}

export interface MetricsSnapshot {
  scope: string;
  events_total: number;
  agreement: number | null;
  kappa: number | null;
  latency_mean_ms: number | null;
  latency_trend_ms: number[];
  band_counts: Record<string, number>;
  disparity: { max_gap: number; threshold: number; flagged: string[][] } | null;
  event_distribution: { labels: string[]; probs: number[] } | null;
  partition: { correct: string[]; error: string[] } | null;
  scores: Record<string, number>;
  pending_reviews: number;
  finalized: number;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

export function isReviewItem(msg: WireMessage): boolean {
  return msg.kind === "review_item";
}

export function isVerdict(msg: WireMessage): boolean {
  return msg.kind === "verdict";
}

export function asReviewItem(payload: Record<string, unknown>): ReviewItemPayload {
  for (const field of [
    "event_id",
    "t_event",
    "explanation",
    "impact_lo",
    "impact_hi",
    "p_lo",
    "p_hi",
    "t_w",
    "tau",
    "band",
    "entropy_nats",
  ]) {
    if (!(field in payload)) {
      throw new Error(`review_item payload missing field ${field}`);
    }
  }
  return payload as unknown as ReviewItemPayload;
}

export function asMetrics(payload: Record<string, unknown>): MetricsSnapshot {
  if (!("scope" in payload) || !("band_counts" in payload)) {
    throw new Error("metrics payload missing required fields");
  }
  return payload as unknown as MetricsSnapshot;
}
