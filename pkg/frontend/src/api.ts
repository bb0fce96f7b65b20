/** Thin typed client for the pipeline service. All pipeline logic lives
 * server-side; this module only moves JSON. */

import type {
  GenerateRequest,
  GenerateResponse,
  HealthResponse,
  KnOverlapResponse,
  RetrieveRequest,
  RetrieveResponse,
  StageError,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly stage: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

function toStageError(err: unknown): StageError {
  if (err instanceof ApiError) {
    return { code: err.code, message: err.message, stage: err.stage };
  }
  return { code: "network_error", message: String(err), stage: "api" };
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      const err = (payload ?? {}) as Partial<StageError>;
      throw new ApiError(
        err.code ?? `http_${response.status}`,
        err.message ?? `HTTP ${response.status}`,
        err.stage ?? "api",
      );
    }
    return payload as T;
  }

  retrieve(request: RetrieveRequest): Promise<RetrieveResponse> {
    return this.post("/v1/retrieve", request);
  }

  generate(request: GenerateRequest): Promise<GenerateResponse> {
    return this.post("/v1/generate", request);
  }

  knOverlap(candidate: string, kn: string, n: number): Promise<KnOverlapResponse> {
    return this.post("/v1/metrics/kn-overlap", { candidate, kn, n });
  }

  async health(): Promise<HealthResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/healthz`);
    if (!response.ok) throw new ApiError(`http_${response.status}`, "health check failed", "api");
    return (await response.json()) as HealthResponse;
  }
}

export { toStageError };
