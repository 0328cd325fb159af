// DOM wiring: all rendering goes through the pure view-model functions in
// viewmodel.ts; this file only moves data between fetches and elements.

import {
  ApiError,
  getHistory,
  getLeaderboard,
  getStatus,
  postSubmission,
  type LeaderboardEntry,
  type ScoreHistory,
} from "./api.js";
import { DEFAULT_POLL_MS, LatestWins, startPolling } from "./poll.js";
import {
  checkGraphUpload,
  leaderboardView,
  statusBadge,
  submissionError,
  trendChart,
} from "./viewmodel.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const SERIES_COLORS = ["#2b6cb0", "#c05621", "#2f855a", "#805ad5", "#b83280", "#718096"];

// -- leaderboard -------------------------------------------------------------

const boardSeq = new LatestWins();
let currentTrack = 1;
let lastUpdated: Date | null = null;

async function refreshLeaderboard(): Promise<void> {
  const token = boardSeq.begin();
  try {
    const entries = await getLeaderboard(currentTrack);
    if (!boardSeq.tryApply(token)) return;
    lastUpdated = new Date();
    $("stale-banner").hidden = true;
    renderBoard(entries);
    renderTeamPicker(entries.map((e) => e.team));
  } catch {
    if (!boardSeq.tryApply(token)) return;
    const banner = $("stale-banner");
    banner.hidden = false;
    banner.textContent = lastUpdated
      ? `service unreachable; showing data from ${lastUpdated.toLocaleTimeString()}`
      : "service unreachable";
  }
}

function renderBoard(entries: LeaderboardEntry[]): void {
  const view = leaderboardView(entries);
  const tbody = $("board-body");
  tbody.replaceChildren();
  if (view.empty) {
    const row = document.createElement("tr");
    const cell = document.createElement("td");
    cell.colSpan = 4;
    cell.className = "empty";
    cell.textContent = view.emptyMessage;
    row.appendChild(cell);
    tbody.appendChild(row);
    return;
  }
  for (const r of view.rows) {
    const row = document.createElement("tr");
    for (const value of [String(r.rank), r.team, String(r.score), `${r.latencyMs} ms`]) {
      const cell = document.createElement("td");
      cell.textContent = value;
      row.appendChild(cell);
    }
    tbody.appendChild(row);
  }
}

// -- submission form -----------------------------------------------------------

let selectedGraph: unknown = null;

function wireForm(): void {
  const fileInput = $<HTMLInputElement>("graph-file");
  const feedback = $("form-feedback");

  fileInput.addEventListener("change", async () => {
    feedback.textContent = "";
    selectedGraph = null;
    const file = fileInput.files?.[0];
    if (!file) return;
    const text = await file.text();
    const check = checkGraphUpload(text, file.size);
    if (!check.ok) {
      feedback.textContent = check.error ?? "invalid file";
      feedback.className = "error";
      return;
    }
    selectedGraph = check.graph;
    feedback.textContent = "graph parsed ok";
    feedback.className = "ok";
  });

  $<HTMLFormElement>("submit-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    feedback.className = "error";
    const team = $<HTMLInputElement>("team-name").value.trim();
    const track = Number($<HTMLSelectElement>("submit-track").value);
    if (!team) {
      feedback.textContent = "team name is required";
      return;
    }
    if (selectedGraph === null) {
      feedback.textContent = "choose a graph file first";
      return;
    }
    try {
      const { id } = await postSubmission(team, track, selectedGraph);
      feedback.textContent = "";
      watchSubmission(id);
    } catch (err) {
      if (err instanceof ApiError) {
        const inline = submissionError(err.body);
        feedback.textContent = inline.nodeId
          ? `${inline.message} (node ${inline.nodeId})`
          : inline.message;
      } else {
        feedback.textContent = `network failure: ${(err as Error).message}; try again`;
      }
    }
  });
}

function watchSubmission(id: string): void {
  const list = $("status-list");
  const item = document.createElement("li");
  const idSpan = document.createElement("code");
  idSpan.textContent = id;
  const badge = document.createElement("span");
  badge.className = "badge pending";
  badge.textContent = "Submitted";
  item.append(idSpan, " ", badge);
  list.prepend(item);

  const seq = new LatestWins();
  const poller = startPolling(async () => {
    const token = seq.begin();
    try {
      const payload = await getStatus(id);
      if (!seq.tryApply(token)) return;
      const view = statusBadge(payload);
      badge.textContent = view.label;
      badge.className = `badge ${view.kind}`;
      if (view.terminal) {
        poller.stop();
        void refreshLeaderboard();
      }
    } catch {
      /* transient; next tick retries */
    }
  }, 1000);
}

// -- trends ----------------------------------------------------------------------

const selectedTeams = new Set<string>();
const trendSeq = new LatestWins();

function renderTeamPicker(teams: string[]): void {
  const box = $("team-picker");
  box.replaceChildren();
  for (const team of teams) {
    const label = document.createElement("label");
    const cb = document.createElement("input");
    cb.type = "checkbox";
    cb.checked = selectedTeams.has(team);
    cb.addEventListener("change", () => {
      if (cb.checked) selectedTeams.add(team);
      else selectedTeams.delete(team);
      void refreshTrends();
    });
    label.append(cb, ` ${team}`);
    box.appendChild(label);
  }
}

async function refreshTrends(): Promise<void> {
  const token = trendSeq.begin();
  const teams = [...selectedTeams].sort();
  const histories: ScoreHistory[] = await Promise.all(
    teams.map((team) => getHistory(team, currentTrack).catch(() => ({ team, track: currentTrack, points: [] }))),
  );
  if (!trendSeq.tryApply(token)) return;
  renderTrends(histories);
}

function renderTrends(histories: ScoreHistory[]): void {
  const chart = trendChart(histories);
  const svg = $("trend-svg");
  svg.setAttribute("viewBox", `0 0 ${chart.width} ${chart.height}`);
  svg.replaceChildren();
  const legend = $("trend-legend");
  legend.replaceChildren();

  chart.series.forEach((series, index) => {
    const color = SERIES_COLORS[index % SERIES_COLORS.length];
    const entry = document.createElement("span");
    entry.style.color = color;
    entry.textContent = series.noData ? `${series.team} (no data)` : series.team;
    legend.appendChild(entry);
    if (series.noData) return;

    if (series.path) {
      const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
      path.setAttribute("d", series.path);
      path.setAttribute("fill", "none");
      path.setAttribute("stroke", color);
      path.setAttribute("stroke-width", "2");
      svg.appendChild(path);
    }
    for (const point of series.points) {
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", point.x.toFixed(2));
      dot.setAttribute("cy", point.y.toFixed(2));
      dot.setAttribute("r", "3.5");
      dot.setAttribute("fill", color);
      const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
      title.textContent = `${series.team}: ${point.score} at ${point.evaluatedAt}`;
      dot.appendChild(title);
      svg.appendChild(dot);
    }
  });
}

// -- boot --------------------------------------------------------------------------

function boot(): void {
  $<HTMLSelectElement>("board-track").addEventListener("change", (event) => {
    currentTrack = Number((event.target as HTMLSelectElement).value);
    void refreshLeaderboard();
    void refreshTrends();
  });
  wireForm();
  startPolling(() => void refreshLeaderboard(), DEFAULT_POLL_MS);
}

boot();
