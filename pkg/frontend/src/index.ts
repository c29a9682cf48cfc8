export { RewardClient, EnvelopeRejectedError, TransportError } from "./client.js";
export type {
  ClientConfig,
  HealthStatus,
  OutputFormat,
  RewardDetail,
  RewardResponse,
  RewardSample,
  SpecOverride,
} from "./types.js";
