// Pure view-model mappings: API payloads in, render-ready structures out.
// Every displayed number is copied verbatim from a payload; the only
// client-side arithmetic is axis scaling for the trend chart.

import type {
  ApiErrorBody,
  LeaderboardEntry,
  ScoreHistory,
  StatusResponse,
} from "./api.js";

// -- leaderboard ------------------------------------------------------------

export interface LeaderboardRow {
  rank: number;
  team: string;
  score: number;
  latencyMs: number;
}

export interface LeaderboardView {
  rows: LeaderboardRow[];
  empty: boolean;
  emptyMessage: string;
}

export function leaderboardView(entries: LeaderboardEntry[]): LeaderboardView {
  return {
    rows: entries.map((e) => ({
      rank: e.rank,
      team: e.team,
      score: e.best_final_score,
      latencyMs: e.latency_ms,
    })),
    empty: entries.length === 0,
    emptyMessage: entries.length === 0 ? "no scored submissions yet" : "",
  };
}

// -- submission status -------------------------------------------------------

export interface StatusBadge {
  label: string;
  kind: "pending" | "active" | "scored" | "rejected" | "failed";
  terminal: boolean;
}

const ACTIVE_STATES = new Set(["Compiling", "Profiling", "Inferring", "Scoring"]);

export function statusBadge(payload: StatusResponse): StatusBadge {
  const sub = payload.submission;
  switch (sub.status) {
    case "Scored": {
      const record = payload.score_record;
      const score = record && record.final_score !== null ? ` (final ${record.final_score})` : "";
      return { label: `Scored${score}`, kind: "scored", terminal: true };
    }
    case "LatencyRejected": {
      const detail =
        sub.latency_ms !== undefined && sub.limit_ms !== undefined
          ? ` (${sub.latency_ms} ms > ${sub.limit_ms} ms)`
          : "";
      return { label: `Latency Rejected${detail}`, kind: "rejected", terminal: true };
    }
    case "Failed":
      return {
        label: `Failed${sub.failure_reason ? `: ${sub.failure_reason}` : ""}`,
        kind: "failed",
        terminal: true,
      };
    default:
      return {
        label: sub.status,
        kind: ACTIVE_STATES.has(sub.status) ? "active" : "pending",
        terminal: false,
      };
  }
}

// -- submit form -------------------------------------------------------------

export const MAX_UPLOAD_BYTES = 5 * 1024 * 1024;

export interface UploadCheck {
  ok: boolean;
  error?: string;
  graph?: unknown;
}

// Client-side pre-parse for instant feedback; the server remains the
// authority on full validation.
export function checkGraphUpload(text: string, byteLength: number): UploadCheck {
  if (byteLength > MAX_UPLOAD_BYTES) {
    return { ok: false, error: `file too large (${byteLength} bytes > ${MAX_UPLOAD_BYTES})` };
  }
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    return { ok: false, error: `not valid JSON: ${(e as Error).message}` };
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    return { ok: false, error: "graph document must be a JSON object" };
  }
  for (const field of ["name", "inputs", "outputs", "nodes"]) {
    if (!(field in (doc as Record<string, unknown>))) {
      return { ok: false, error: `graph document missing field "${field}"` };
    }
  }
  return { ok: true, graph: doc };
}

export interface InlineError {
  message: string;
  nodeId: string | null;
}

export function submissionError(body: ApiErrorBody): InlineError {
  const detail = body.detail as { node_id?: string | null } | undefined;
  return {
    message: body.message,
    nodeId: detail && typeof detail === "object" && detail.node_id ? detail.node_id : null,
  };
}

// -- trends ------------------------------------------------------------------

export interface TrendPoint {
  x: number;
  y: number;
  evaluatedAt: string;
  score: number; // verbatim payload value
}

export interface TrendSeries {
  team: string;
  points: TrendPoint[];
  path: string | null; // null for a single marker, no line
  noData: boolean;
}

export interface TrendChart {
  series: TrendSeries[];
  width: number;
  height: number;
  yMin: number;
  yMax: number;
}

export interface ChartGeometry {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 600, height: 240, padding: 30 };

export function trendChart(histories: ScoreHistory[], geometry: ChartGeometry = DEFAULT_GEOMETRY): TrendChart {
  const { width, height, padding } = geometry;
  const all = histories.flatMap((h) => h.points);
  const times = all.map((p) => Date.parse(p.evaluated_at));
  const scores = all.map((p) => p.final_score);
  const tMin = times.length ? Math.min(...times) : 0;
  const tMax = times.length ? Math.max(...times) : 1;
  const yMin = scores.length ? Math.min(...scores) : 0;
  const yMax = scores.length ? Math.max(...scores) : 1;
  const tSpan = tMax - tMin || 1;
  const ySpan = yMax - yMin || 1;
  const innerW = width - 2 * padding;
  const innerH = height - 2 * padding;

  const series = histories.map((history): TrendSeries => {
    if (history.points.length === 0) {
      return { team: history.team, points: [], path: null, noData: true };
    }
    const points = history.points.map((p) => ({
      x: padding + ((Date.parse(p.evaluated_at) - tMin) / tSpan) * innerW,
      y: padding + innerH - ((p.final_score - yMin) / ySpan) * innerH,
      evaluatedAt: p.evaluated_at,
      score: p.final_score,
    }));
    const path =
      points.length < 2
        ? null
        : points.map((p, i) => `${i === 0 ? "M" : "L"} ${p.x.toFixed(2)} ${p.y.toFixed(2)}`).join(" ");
    return { team: history.team, points, path, noData: false };
  });

  return { series, width, height, yMin, yMax };
}
