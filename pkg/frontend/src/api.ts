import type {
  ComparePayload,
  CurvesPayload,
  DatasetSummary,
  EvaluateRequest,
  FitPayload,
  JobStatus,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function readError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  return new ApiError(response.status, detail);
}

/** Typed client for the fitting service; all statistics stay server-side. */
export class ApiClient {
  constructor(
    readonly baseUrl: string = "http://127.0.0.1:8741",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
    private readonly pollIntervalMs: number = 400,
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok && response.status !== 202) throw await readError(response);
    return (await response.json()) as T;
  }

  async uploadDataset(file: Blob | string): Promise<DatasetSummary> {
    let response: Response;
    if (typeof file === "string") {
      response = await this.fetchImpl(`${this.baseUrl}/datasets`, {
        method: "POST",
        body: file,
      });
    } else {
      const form = new FormData();
      form.append("file", file);
      response = await this.fetchImpl(`${this.baseUrl}/datasets`, {
        method: "POST",
        body: form,
      });
    }
    if (!response.ok) throw await readError(response);
    return (await response.json()) as DatasetSummary;
  }

  async evaluate(request: EvaluateRequest): Promise<CurvesPayload> {
    const body = await this.post<{ curves: CurvesPayload }>("/evaluate", request);
    return body.curves;
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    const response = await this.fetchImpl(`${this.baseUrl}/jobs/${jobId}`);
    if (!response.ok) throw await readError(response);
    return (await response.json()) as JobStatus;
  }

  /**
   * Run a fit; long fits come back as 202 + job id, which is polled until a
   * terminal state. ``onProgress`` receives (iterations, current loglik).
   */
  async fit(
    body: Record<string, unknown>,
    onProgress?: (iterations: number, loglik: number | null) => void,
  ): Promise<FitPayload> {
    const response = await this.fetchImpl(`${this.baseUrl}/fit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status === 202) {
      const { job } = (await response.json()) as { job: string };
      return this.pollJob(job, onProgress);
    }
    if (!response.ok) throw await readError(response);
    return (await response.json()) as FitPayload;
  }

  private pollJob(
    jobId: string,
    onProgress?: (iterations: number, loglik: number | null) => void,
  ): Promise<FitPayload> {
    return new Promise((resolve, reject) => {
      const tick = async () => {
        try {
          const status = await this.jobStatus(jobId);
          if (status.status === "running") {
            onProgress?.(status.iterations, status.loglik);
            setTimeout(tick, this.pollIntervalMs);
          } else if (status.status === "done" && status.result) {
            onProgress?.(status.iterations, status.loglik);
            resolve(status.result);
          } else {
            reject(new ApiError(500, status.error ?? "fit failed"));
          }
        } catch (err) {
          reject(err);
        }
      };
      void tick();
    });
  }

  async compareOcp(body: Record<string, unknown>): Promise<ComparePayload> {
    return this.post<ComparePayload>("/fit-ocp/compare", body);
  }
}
