/** Typed client for the map service REST contract. */

export interface SceneSummary {
  scene_token: string;
  n_objects: number;
}

export interface ToolStep {
  call: string;
  ok: boolean;
  result: string | null;
  error: string | null;
}

export interface ChatResponseBody {
  inferred_query: string;
  query_achievable: boolean;
  spatial_reasoning_functions: string[];
  explanation: string;
  answer: unknown;
  referenced_object_ids: number[];
  tool_trace: ToolStep[];
}

export interface ChatResult {
  conversation_id: string;
  scene_token: string;
  response: ChatResponseBody;
  transcript_length: number;
}

export interface ChatRequest {
  scene_token: string;
  message: string;
  conversation_id?: string;
}

/** Non-2xx responses carry {"error": {"code", "message"}}. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function readError(status: number, res: Response): Promise<ApiError> {
  let code = 'unknown';
  let message = `request failed with status ${status}`;
  try {
    const body = (await res.json()) as { error?: { code?: string; message?: string } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(status, code, message);
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = '',
    fetchImpl?: FetchLike,
  ) {
    // bind so a bare global fetch keeps its expected receiver
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async getJson(path: string): Promise<unknown> {
    const res = await this.fetchImpl(this.baseUrl + path);
    if (!res.ok) throw await readError(res.status, res);
    return res.json();
  }

  async listScenes(): Promise<SceneSummary[]> {
    const body = (await this.getJson('/api/scenes')) as { scenes: SceneSummary[] };
    return body.scenes;
  }

  /** Raw payload; callers validate with parseRenderPayload before drawing. */
  fetchRender(sceneToken: string): Promise<unknown> {
    return this.getJson(`/api/scenes/${encodeURIComponent(sceneToken)}/render`);
  }

  fetchMap(sceneToken: string): Promise<unknown> {
    return this.getJson(`/api/scenes/${encodeURIComponent(sceneToken)}/map`);
  }

  async chat(req: ChatRequest): Promise<ChatResult> {
    const res = await this.fetchImpl(this.baseUrl + '/api/chat', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(req),
    });
    if (!res.ok) throw await readError(res.status, res);
    return (await res.json()) as ChatResult;
  }
}
