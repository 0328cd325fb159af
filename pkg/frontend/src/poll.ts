// Polling with last-write-wins rendering: responses are applied only if
// no later request has already been applied, so a stale fetch can never
// overwrite fresher data.

export class LatestWins {
  private nextToken = 0;
  private applied = -1;

  begin(): number {
    return this.nextToken++;
  }

  tryApply(token: number): boolean {
    if (token < this.applied) {
      return false;
    }
    this.applied = token;
    return true;
  }
}

export interface Poller {
  stop(): void;
}

export const DEFAULT_POLL_MS = 5000;

export function startPolling(tick: () => void, intervalMs: number = DEFAULT_POLL_MS): Poller {
  tick();
  const handle = setInterval(tick, intervalMs);
  return { stop: () => clearInterval(handle) };
}
