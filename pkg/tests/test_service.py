import json
import random

import pytest
from fastapi.testclient import TestClient

from rxnkit.model import load_annotations
from rxnkit.reward import RewardSpec, sample_reward
from rxnkit.service import GTStore, create_app
from conftest import make_annotation_dict, perfect_raw, degraded_raw


@pytest.fixture(scope="module")
def corpus():
    rng = random.Random(42)
    lines = [json.dumps(make_annotation_dict(rng, f"im{i}")) for i in range(10)]
    return load_annotations(lines)


@pytest.fixture(scope="module")
def client(corpus):
    store = GTStore().load_inline(corpus)
    app = create_app(store, RewardSpec.from_ratio("1:1"), max_batch=64)
    with TestClient(app) as c:
        yield c


def _sample(i, image_id, raw):
    return {"sample_id": f"s{i}", "image_id": image_id, "raw": raw, "format": "idtvp"}


class TestHealth:
    def test_ready_with_counts(self, client, corpus):
        body = client.get("/v1/health").json()
        assert body["status"] == "ready"
        assert body["loaded_gt_count"] == len(corpus)
        assert body["spec"]["soft_weight"] == 0.5

    def test_initializing_before_load(self):
        app = create_app(GTStore())
        with TestClient(app) as c:
            assert c.get("/v1/health").json()["status"] == "initializing"


class TestRewardBatch:
    def test_batch_of_eight_aligned(self, client, corpus):
        rng = random.Random(0)
        ann = corpus["im0"]
        raws = [degraded_raw(json.loads(_ann_json(ann)), rng) for _ in range(8)]
        samples = [_sample(i, "im0", raws[i]) for i in range(8)]
        body = client.post("/v1/reward", json={"samples": samples}).json()
        assert [r["sample_id"] for r in body["rewards"]] == [f"s{i}" for i in range(8)]
        for i, r in enumerate(body["rewards"]):
            expected = sample_reward(raws[i], ann, spec=RewardSpec.from_ratio("1:1"))
            assert r["reward"] == expected.reward

    def test_unknown_image_isolated(self, client, corpus):
        ann_raw = perfect_raw(json.loads(_ann_json(corpus["im1"])))
        samples = [
            _sample(0, "im1", ann_raw),
            _sample(1, "who-is-this", "[]"),
            _sample(2, "im1", "[]"),
        ]
        body = client.post("/v1/reward", json={"samples": samples}).json()
        assert body["rewards"][0]["reward"] == 1.0
        assert body["rewards"][1]["reward"] == 0.0
        assert "unknown image_id" in body["rewards"][1]["error"]
        assert body["rewards"][2]["reward"] == 0.0
        assert "error" not in body["rewards"][2]

    def test_identical_samples_identical_rewards(self, client, corpus):
        raw = perfect_raw(json.loads(_ann_json(corpus["im2"])))
        samples = [_sample(0, "im2", raw), _sample(1, "im2", raw)]
        body = client.post("/v1/reward", json={"samples": samples}).json()
        assert body["rewards"][0]["reward"] == body["rewards"][1]["reward"] == 1.0

    def test_deterministic_across_requests(self, client, corpus):
        rng = random.Random(9)
        raw = degraded_raw(json.loads(_ann_json(corpus["im3"])), rng)
        req = {"samples": [_sample(0, "im3", raw)]}
        a = client.post("/v1/reward", json=req).json()["rewards"][0]
        b = client.post("/v1/reward", json=req).json()["rewards"][0]
        assert a == b

    def test_inline_ground_truth(self, client):
        rng = random.Random(4)
        d = make_annotation_dict(rng, "inline-img")
        sample = {
            "sample_id": "x",
            "ground_truth": d,
            "raw": perfect_raw(d),
            "format": "idtvp",
        }
        body = client.post("/v1/reward", json={"samples": [sample]}).json()
        assert body["rewards"][0]["reward"] == 1.0

    def test_spec_override(self, client, corpus):
        raw = "[]"
        req = {"samples": [_sample(0, "im4", raw)], "spec": {"ratio": "1:0"}}
        body = client.post("/v1/reward", json=req).json()
        assert body["rewards"][0]["reward"] == 0.0

    def test_timing_metadata(self, client, corpus):
        body = client.post("/v1/reward", json={"samples": [_sample(0, "im5", "[]")]}).json()
        assert body["timing"]["samples"] == 1
        assert body["timing"]["total_ms"] >= 0


class TestEnvelopeErrors:
    def test_duplicate_sample_ids(self, client):
        samples = [_sample(0, "im0", "[]"), _sample(0, "im0", "[]")]
        resp = client.post("/v1/reward", json={"samples": samples})
        assert resp.status_code == 400

    def test_oversize_batch(self, client):
        samples = [_sample(i, "im0", "[]") for i in range(65)]
        resp = client.post("/v1/reward", json={"samples": samples})
        assert resp.status_code == 400

    def test_malformed_body(self, client):
        resp = client.post("/v1/reward", json={"nope": True})
        assert resp.status_code == 400

    def test_missing_gt_reference_is_per_sample(self, client):
        resp = client.post("/v1/reward", json={"samples": [{"sample_id": "a", "raw": "[]"}]})
        assert resp.status_code == 200
        assert resp.json()["rewards"][0]["reward"] == 0.0
        assert "error" in resp.json()["rewards"][0]


def _ann_json(ann):
    from rxnkit.model import serialize_annotation

    return serialize_annotation(ann)
