import {
  EditedRule,
  EditOp,
  Favorite,
  JobStatus,
  MapPayload,
  RankSpec,
  ResultsPayload,
  SessionInfo,
  SubgroupRow,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly position?: number;

  constructor(status: number, detail: string, position?: number) {
    super(detail);
    this.status = status;
    this.position = position;
  }
}

async function toError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  let position: number | undefined;
  try {
    const body = await resp.json();
    if (typeof body.detail === 'string') detail = body.detail;
    if (typeof body.position === 'number') position = body.position;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail, position);
}

function selectionKey(selection: number[]): string {
  return selection.join(',');
}

/** Thin typed wrapper over the session service.
 *
 * Rerank requests are latest-wins: starting a new one aborts the previous
 * in-flight request. Map layouts are cached and deduplicated per selection
 * signature, matching the server-side layout cache.
 */
export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;
  private rerankController: AbortController | null = null;
  private readonly mapCache = new Map<string, MapPayload>();
  private readonly mapInFlight = new Map<string, Promise<MapPayload>>();

  constructor(base = '', fetchFn: FetchLike = (i, init) => fetch(i, init)) {
    this.base = base.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const init: RequestInit = { method, signal };
    if (body !== undefined) {
      init.headers = { 'content-type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) throw await toError(resp);
    return (await resp.json()) as T;
  }

  createSession(data: string, schema: string): Promise<SessionInfo> {
    return this.request('POST', '/sessions', { data, schema });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.request('GET', `/sessions/${sessionId}`);
  }

  startDiscover(
    sessionId: string,
    config: { specs: RankSpec[] } & Record<string, unknown>,
  ): Promise<{ job_id: string }> {
    this.mapCache.clear();
    this.mapInFlight.clear();
    return this.request('POST', `/sessions/${sessionId}/discover`, config);
  }

  jobStatus(sessionId: string, jobId: string): Promise<JobStatus> {
    return this.request('GET', `/sessions/${sessionId}/jobs/${jobId}`);
  }

  /** Poll a discovery job until it leaves the running state. */
  async waitForJob(
    sessionId: string,
    jobId: string,
    intervalMs = 250,
    sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((r) => setTimeout(r, ms)),
  ): Promise<JobStatus> {
    for (;;) {
      const status = await this.jobStatus(sessionId, jobId);
      if (status.status !== 'running') return status;
      await sleep(intervalMs);
    }
  }

  /** Reorder the cached pool; aborts any rerank still in flight. */
  async rerank(sessionId: string, specs: RankSpec[]): Promise<ResultsPayload> {
    if (this.rerankController) this.rerankController.abort();
    const controller = new AbortController();
    this.rerankController = controller;
    try {
      return await this.request<ResultsPayload>(
        'POST',
        `/sessions/${sessionId}/rerank`,
        { specs },
        controller.signal,
      );
    } finally {
      if (this.rerankController === controller) this.rerankController = null;
    }
  }

  evaluateRule(sessionId: string, rule: string): Promise<SubgroupRow> {
    return this.request('POST', `/sessions/${sessionId}/rules/evaluate`, {
      rule,
    });
  }

  editRule(
    sessionId: string,
    rule: { rule: string } | { predicates: unknown; dormant: unknown },
    edit: EditOp,
  ): Promise<EditedRule> {
    return this.request('POST', `/sessions/${sessionId}/rules/edit`, {
      ...rule,
      edit,
    });
  }

  /** Layout for the selected pool indices, deduplicated per signature. */
  getMap(sessionId: string, selection: number[]): Promise<MapPayload> {
    const key = selectionKey(selection);
    const cached = this.mapCache.get(key);
    if (cached) return Promise.resolve(cached);
    const inFlight = this.mapInFlight.get(key);
    if (inFlight) return inFlight;
    const query = selection.length ? `?selection=${key}` : '';
    const promise = this.request<MapPayload>(
      'GET',
      `/sessions/${sessionId}/map${query}`,
    ).then((payload) => {
      this.mapCache.set(key, payload);
      this.mapInFlight.delete(key);
      return payload;
    });
    this.mapInFlight.set(key, promise);
    return promise;
  }

  /** Bubble indices whose members intersect the hovered rule. */
  matchingBubbles(
    sessionId: string,
    selection: number[],
    rule: string,
  ): Promise<number[]> {
    return this.request<{ bubbles: number[] }>(
      'POST',
      `/sessions/${sessionId}/map/matching`,
      { selection, rule },
    ).then((body) => body.bubbles);
  }

  /** Targeted discovery over the lassoed bubbles of the current layout. */
  searchInSelection(
    sessionId: string,
    selection: number[],
    bubbles: number[],
  ): Promise<ResultsPayload> {
    return this.request('POST', `/sessions/${sessionId}/map/search`, {
      selection,
      bubbles,
    });
  }

  putFavorites(
    sessionId: string,
    favorites: (string | Favorite)[],
  ): Promise<{ favorites: Favorite[] }> {
    return this.request('PUT', `/sessions/${sessionId}/favorites`, {
      favorites,
    });
  }

  getFavorites(sessionId: string): Promise<{ favorites: Favorite[] }> {
    return this.request('GET', `/sessions/${sessionId}/favorites`);
  }
}
