// Typed client for the public referee API. The console touches nothing
// else: no bundle paths, no server-side state.

export interface LeaderboardEntry {
  rank: number;
  team: string;
  track: number;
  best_final_score: number;
  best_submission_id: string;
  latency_ms: number;
  last_improved_at: string;
}

export interface HistoryPoint {
  evaluated_at: string;
  final_score: number;
}

export interface ScoreHistory {
  team: string;
  track: number;
  points: HistoryPoint[];
}

export interface SubmissionView {
  id: string;
  team: string;
  track: number;
  status: string;
  submitted_at: string;
  failure_reason: string | null;
  latency_ms?: number;
  limit_ms?: number;
}

export interface ScoreRecordView {
  submission_id: string;
  latency_ms: number;
  gate: string;
  metric_value: number | null;
  final_score: number | null;
  evaluated_at: string;
}

export interface StatusResponse {
  submission: SubmissionView;
  score_record?: ScoreRecordView;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: { node_id?: string | null } | unknown;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  const text = await resp.text();
  const body = text ? JSON.parse(text) : null;
  if (!resp.ok) {
    throw new ApiError(resp.status, body ?? { code: "internal", message: `HTTP ${resp.status}` });
  }
  return body as T;
}

export function getLeaderboard(track: number): Promise<LeaderboardEntry[]> {
  return request(`/api/v1/leaderboard/${track}`);
}

export function getHistory(team: string, track: number): Promise<ScoreHistory> {
  return request(`/api/v1/teams/${encodeURIComponent(team)}/history?track=${track}`);
}

export function getStatus(id: string): Promise<StatusResponse> {
  return request(`/api/v1/submissions/${encodeURIComponent(id)}`);
}

export function postSubmission(team: string, track: number, graph: unknown): Promise<{ id: string; status: string }> {
  return request("/api/v1/submissions", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ team, track, graph }),
  });
}
