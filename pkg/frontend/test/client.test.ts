import http from "node:http";
import { AddressInfo } from "node:net";
import { afterEach, describe, expect, it } from "vitest";

import { EnvelopeRejectedError, RewardClient, TransportError } from "../src/client.js";

type Handler = (req: http.IncomingMessage, res: http.ServerResponse, n: number) => void;

let servers: http.Server[] = [];

function stubServer(handler: Handler): Promise<{ url: string; requests: () => number }> {
  let count = 0;
  const server = http.createServer((req, res) => {
    count += 1;
    handler(req, res, count);
  });
  servers.push(server);
  return new Promise((resolve) => {
    server.listen(0, "127.0.0.1", () => {
      const { port } = server.address() as AddressInfo;
      resolve({ url: `http://127.0.0.1:${port}`, requests: () => count });
    });
  });
}

afterEach(async () => {
  await Promise.all(servers.map((s) => new Promise((r) => s.close(r))));
  servers = [];
});

const okBody = JSON.stringify({
  rewards: [
    { sample_id: "a", reward: 1.0, soft_component: 1.0, hybrid_component: 1.0, parse_ok: true },
  ],
  timing: { total_ms: 0.1, samples: 1 },
});

describe("submitBatch", () => {
  it("resolves an empty batch without sending a request", async () => {
    const { url, requests } = await stubServer((_req, res) => {
      res.end(okBody);
    });
    const client = new RewardClient({ endpoint: url });
    expect(await client.submitBatch([])).toEqual([]);
    expect(requests()).toBe(0);
  });

  it("fills in the default format and posts the documented envelope", async () => {
    let seen: unknown;
    const { url } = await stubServer((req, res) => {
      let raw = "";
      req.on("data", (c) => (raw += c));
      req.on("end", () => {
        seen = JSON.parse(raw);
        res.setHeader("content-type", "application/json");
        res.end(okBody);
      });
    });
    const client = new RewardClient({ endpoint: url, defaultFormat: "bivp" });
    await client.submitBatch([{ sample_id: "a", raw: "[]", image_id: "im0" }]);
    expect(seen).toEqual({
      samples: [{ format: "bivp", sample_id: "a", raw: "[]", image_id: "im0" }],
    });
  });

  it("retries transport failures and succeeds once the service recovers", async () => {
    const { url, requests } = await stubServer((req, res, n) => {
      if (n <= 2) {
        req.socket.destroy();
        return;
      }
      res.setHeader("content-type", "application/json");
      res.end(okBody);
    });
    const client = new RewardClient({ endpoint: url, retries: 2 });
    const rewards = await client.submitBatch([{ sample_id: "a", raw: "[]", image_id: "im0" }]);
    expect(rewards[0].reward).toBe(1.0);
    expect(requests()).toBe(3);
  });

  it("gives up after the configured retries when the service stays down", async () => {
    const client = new RewardClient({ endpoint: "http://127.0.0.1:1", retries: 2, timeoutMs: 500 });
    const err = await client
      .submitBatch([{ sample_id: "a", raw: "[]", image_id: "im0" }])
      .catch((e) => e);
    expect(err).toBeInstanceOf(TransportError);
    expect((err as TransportError).attempts).toBe(3);
  });

  it("raises envelope rejections immediately, with the server message", async () => {
    const { url, requests } = await stubServer((_req, res) => {
      res.statusCode = 400;
      res.setHeader("content-type", "application/json");
      res.end(JSON.stringify({ error: "sample_ids must be unique within a request" }));
    });
    const client = new RewardClient({ endpoint: url, retries: 3 });
    const err = await client
      .submitBatch([{ sample_id: "a", raw: "[]", image_id: "im0" }])
      .catch((e) => e);
    expect(err).toBeInstanceOf(EnvelopeRejectedError);
    expect((err as EnvelopeRejectedError).status).toBe(400);
    expect(String(err)).toContain("sample_ids must be unique");
    expect(requests()).toBe(1); // 4xx is not retried
  });

  it("aborts attempts that exceed the timeout", async () => {
    const { url, requests } = await stubServer(() => {
      /* never respond */
    });
    const client = new RewardClient({ endpoint: url, retries: 1, timeoutMs: 150 });
    const t0 = Date.now();
    const err = await client
      .submitBatch([{ sample_id: "a", raw: "[]", image_id: "im0" }])
      .catch((e) => e);
    expect(err).toBeInstanceOf(TransportError);
    expect(requests()).toBe(2);
    expect(Date.now() - t0).toBeLessThan(2000);
  });
});

describe("health", () => {
  it("returns the parsed status document", async () => {
    const { url } = await stubServer((_req, res) => {
      res.setHeader("content-type", "application/json");
      res.end(
        JSON.stringify({
          status: "ready",
          loaded_gt_count: 7,
          spec: { soft_weight: 0.5, hybrid_weight: 0.5, iou_threshold: 0.5, ned_threshold: 0.2 },
          max_batch: 512,
        }),
      );
    });
    const client = new RewardClient({ endpoint: url });
    const health = await client.health();
    expect(health.status).toBe("ready");
    expect(health.loaded_gt_count).toBe(7);
  });

  it("surfaces transport errors", async () => {
    const client = new RewardClient({ endpoint: "http://127.0.0.1:1", retries: 0, timeoutMs: 300 });
    await expect(client.health()).rejects.toBeInstanceOf(TransportError);
  });
});

describe("config validation", () => {
  it("rejects nonsense timeouts and retry counts", () => {
    expect(() => new RewardClient({ endpoint: "http://x", timeoutMs: 0 })).toThrow();
    expect(() => new RewardClient({ endpoint: "http://x", retries: -1 })).toThrow();
  });
});
