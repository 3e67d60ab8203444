/** Typed client for the inference service. JSON over HTTP; images travel as
 * base64-encoded PNG strings. */

export interface ModelInfo {
  p: number;
  objective_ids: string[];
  lambda: number[];
  input: { format: string; channels: number; max_pixels: number };
  checkpoint_hash: string;
}

export interface InferResponse {
  image: string;
  clamped_omega: number[];
  latency_ms: number;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, reason: string) {
    super(reason);
    this.status = status;
  }
}

export interface InferClient {
  modelInfo(): Promise<ModelInfo>;
  infer(image: string, omega: number[]): Promise<InferResponse>;
}

async function reasonOf(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.reason === "string") return body.reason;
  } catch {
    /* non-JSON error body */
  }
  return `HTTP ${response.status}`;
}

export class HttpClient implements InferClient {
  constructor(private readonly base: string = "") {}

  async modelInfo(): Promise<ModelInfo> {
    const r = await fetch(`${this.base}/model`);
    if (!r.ok) throw new ApiError(r.status, await reasonOf(r));
    return (await r.json()) as ModelInfo;
  }

  async infer(image: string, omega: number[]): Promise<InferResponse> {
    const r = await fetch(`${this.base}/infer`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ image, omega }),
    });
    if (!r.ok) throw new ApiError(r.status, await reasonOf(r));
    return (await r.json()) as InferResponse;
  }
}
