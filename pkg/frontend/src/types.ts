export type OutputFormat = "bros" | "bivp" | "idtvp";

export interface ClientConfig {
  /** Service base URL, e.g. http://127.0.0.1:8972 */
  endpoint: string;
  /** Per-attempt timeout in milliseconds. Must be > 0. Default 30000. */
  timeoutMs?: number;
  /** Retries after the first attempt for transport-level failures. Default 2. */
  retries?: number;
  /** Format filled in for samples that do not set one. Default "idtvp". */
  defaultFormat?: OutputFormat;
}

export interface RewardSample {
  sample_id: string;
  /** Untouched model output text. */
  raw: string;
  format?: OutputFormat;
  /** Reference into the service's preloaded ground-truth store ... */
  image_id?: string;
  /** ... or a full inline annotation record. */
  ground_truth?: Record<string, unknown>;
  identifier_map?: unknown[];
}

export interface SpecOverride {
  /** soft:hybrid weighting, e.g. "1:0", "0:1", "1:1". */
  ratio?: string;
  iou_threshold?: number;
  ned_threshold?: number;
}

export interface RewardDetail {
  sample_id: string;
  reward: number;
  soft_component: number;
  hybrid_component: number;
  parse_ok: boolean;
  /** Present when the sample could not be scored (unknown image, bad inline GT). */
  error?: string;
  detail?: Record<string, unknown>;
}

export interface RewardResponse {
  rewards: RewardDetail[];
  timing: { total_ms: number; samples: number };
}

export interface HealthStatus {
  status: "ready" | "initializing";
  loaded_gt_count: number;
  spec: {
    soft_weight: number;
    hybrid_weight: number;
    iou_threshold: number;
    ned_threshold: number;
  };
  max_batch: number;
}
