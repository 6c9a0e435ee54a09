/**
 * Typed client for the session service JSON API.
 *
 * All numbers rendered by the UI come verbatim from these responses; the
 * client never post-processes ranking data.
 */

export type Judgment = "relevant" | "irrelevant" | "unsure";

export interface SuggestionCard {
  id: string;
  initial_rank: number;
  thumbnail: string;
}

export interface RoundPayload {
  round_index: number;
  token: string;
  suggestions: SuggestionCard[];
  preview: string[];
  elapsed_ms: number;
  ap?: number;
}

export interface CreateSessionResponse {
  session_id: string;
  status: string;
  rounds_budget: number;
  round: RoundPayload;
}

export interface SubmitResponse {
  session_id: string;
  status: string;
  round?: RoundPayload;
  final_ranking?: string[];
  metrics?: { ap_per_round: number[] };
}

export interface SessionSnapshot {
  session_id: string;
  dataset: string;
  probe: string;
  status: string;
  rounds_budget: number;
  submits_done: number;
  history: Array<{ round: Partial<RoundPayload>; labels: Record<string, Judgment> | null }>;
  current_ranking_preview: string[];
  metrics?: { ap_per_round: number[] };
  final_ranking?: string[];
}

export interface DatasetInfo {
  name: string;
  n_gallery: number;
  probes: string[];
  has_ground_truth: boolean;
}

export interface SessionParamsOverride {
  alpha?: number;
  k?: number;
  q?: number;
  rounds?: number;
  solver?: "approximate" | "qp";
  mr_baseline?: boolean;
  soft_init?: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isStaleToken(): boolean {
    return this.status === 409 && this.code === "stale_token";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(response.status, code, message);
}

export class SessionClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/healthz");
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.request("/datasets");
  }

  createSession(
    dataset: string,
    probe: string,
    params?: SessionParamsOverride,
  ): Promise<CreateSessionResponse> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ dataset, probe, ...(params ? { params } : {}) }),
    });
  }

  submitLabels(
    sessionId: string,
    token: string,
    labels: Record<string, Judgment>,
  ): Promise<SubmitResponse> {
    return this.request(`/sessions/${sessionId}/labels`, {
      method: "POST",
      body: JSON.stringify({ token, labels }),
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request(`/sessions/${sessionId}`);
  }
}
