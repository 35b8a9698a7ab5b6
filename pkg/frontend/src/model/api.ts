/** Thin client for the twin management HTTP API. */

export interface TwinInfo {
  id: string;
  rootClass: string;
  state: "deployed" | "running" | "stopped" | "fault";
  simTime: number;
  overruns: number;
}

export interface DeployRequest {
  id: string;
  rootClass: string;
  stepSize: number;
  rtFactor: number;
  publishEvery: number;
}

export interface ApiFailure {
  status: number;
  code: string;
  message: string;
  diagnostics?: Array<{ uri: string; code: string; message: string }>;
  cycle?: string[];
}

export class ApiError extends Error {
  constructor(readonly failure: ApiFailure) {
    super(failure.message);
  }
}

export class TwinApi {
  constructor(readonly baseUrl: string = "") {}

  async listTwins(): Promise<TwinInfo[]> {
    return this.request("GET", "/api/twins");
  }

  async deploy(request: DeployRequest): Promise<{ id: string }> {
    return this.request("POST", "/api/twins", request);
  }

  async start(id: string): Promise<{ state: string }> {
    return this.request("POST", `/api/twins/${id}/start`);
  }

  async stop(id: string): Promise<{ state: string }> {
    return this.request("POST", `/api/twins/${id}/stop`);
  }

  async undeploy(id: string): Promise<void> {
    await this.request("DELETE", `/api/twins/${id}`);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (response.status === 204) return undefined as T;
    const text = await response.text();
    const doc = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError({
        status: response.status,
        code: doc?.code ?? "error",
        message: doc?.message ?? response.statusText,
        diagnostics: doc?.diagnostics,
        cycle: doc?.cycle,
      });
    }
    return doc as T;
  }
}
