import type {
  ClientConfig,
  HealthStatus,
  OutputFormat,
  RewardDetail,
  RewardResponse,
  RewardSample,
  SpecOverride,
} from "./types.js";

/** The service rejected the request envelope (HTTP 4xx). Not retried. */
export class EnvelopeRejectedError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`reward service rejected the request envelope (HTTP ${status}): ${JSON.stringify(body)}`);
    this.name = "EnvelopeRejectedError";
  }
}

/** The service could not be reached after all retry attempts. */
export class TransportError extends Error {
  constructor(
    public readonly attempts: number,
    public readonly lastError: unknown,
  ) {
    super(`reward service unreachable after ${attempts} attempt(s): ${String(lastError)}`);
    this.name = "TransportError";
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/**
 * Client for the reward service. Never computes rewards locally: the
 * service is the single source of truth, this class only moves bytes.
 */
export class RewardClient {
  readonly endpoint: string;
  readonly timeoutMs: number;
  readonly retries: number;
  readonly defaultFormat: OutputFormat;

  constructor(config: ClientConfig) {
    this.endpoint = config.endpoint.replace(/\/+$/, "");
    this.timeoutMs = config.timeoutMs ?? 30_000;
    this.retries = config.retries ?? 2;
    this.defaultFormat = config.defaultFormat ?? "idtvp";
    if (this.timeoutMs <= 0) throw new Error("timeoutMs must be > 0");
    if (this.retries < 0) throw new Error("retries must be >= 0");
  }

  /**
   * Score a batch of rollouts. Rewards come back aligned to the input
   * order. An empty batch resolves to [] without touching the network.
   */
  async submitBatch(samples: RewardSample[], spec?: SpecOverride): Promise<RewardDetail[]> {
    if (samples.length === 0) return [];
    const body: Record<string, unknown> = {
      samples: samples.map((s) => ({ format: this.defaultFormat, ...s })),
    };
    if (spec !== undefined) body.spec = spec;
    const resp = (await this.request("POST", "/v1/reward", body)) as RewardResponse;
    return resp.rewards;
  }

  async health(): Promise<HealthStatus> {
    return (await this.request("GET", "/v1/health")) as HealthStatus;
  }

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const url = `${this.endpoint}${path}`;
    const attempts = this.retries + 1;
    let lastError: unknown;
    for (let attempt = 1; attempt <= attempts; attempt++) {
      const controller = new AbortController();
      const timer = setTimeout(() => controller.abort(), this.timeoutMs);
      try {
        const resp = await fetch(url, {
          method,
          headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
          body: body !== undefined ? JSON.stringify(body) : undefined,
          signal: controller.signal,
        });
        if (resp.status >= 400 && resp.status < 500) {
          const payload = await resp.json().catch(() => ({ error: `HTTP ${resp.status}` }));
          throw new EnvelopeRejectedError(resp.status, payload);
        }
        if (!resp.ok) {
          // 5xx: transient, retry
          lastError = new Error(`HTTP ${resp.status}`);
          continue;
        }
        return await resp.json();
      } catch (err) {
        if (err instanceof EnvelopeRejectedError) throw err;
        lastError = err;
      } finally {
        clearTimeout(timer);
      }
      if (attempt < attempts) await sleep(Math.min(100 * attempt, 1000));
    }
    throw new TransportError(attempts, lastError);
  }
}
