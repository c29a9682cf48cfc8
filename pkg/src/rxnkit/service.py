"""HTTP reward service for scoring rollout batches.

POST /v1/reward scores a batch of raw predictions against a preloaded
ground-truth store (or inline ground truth); GET /v1/health reports
lifecycle and configuration. Envelope problems are 400s; per-sample
problems (unknown image, bad inline record) mark that sample with reward 0
and leave its siblings untouched.
"""

from __future__ import annotations

import json
import os
import time
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .idmap import IdentifierMap, load_map, load_map_file
from .model import AnnotationError, DiagramAnnotation, load_annotations, parse_ground_truth
from .reward import RewardSpec, sample_reward

__all__ = ["GTStore", "create_app", "serve"]

DEFAULT_MAX_BATCH = 512


class GTStore:
    """Read-only annotation store; immutable once loaded."""

    def __init__(self):
        self._annotations: dict[str, DiagramAnnotation] = {}
        self._maps: dict[str, IdentifierMap] = {}
        self.ready = False

    def load(self, gt_path: str, map_path: str | None = None) -> "GTStore":
        with open(gt_path, encoding="utf-8") as fh:
            self._annotations = load_annotations(fh)
        if map_path:
            with open(map_path, encoding="utf-8") as fh:
                self._maps = load_map_file(fh)
        self.ready = True
        return self

    def load_inline(self, annotations: dict[str, DiagramAnnotation]) -> "GTStore":
        self._annotations = dict(annotations)
        self.ready = True
        return self

    def __len__(self) -> int:
        return len(self._annotations)

    def annotation(self, image_id: str) -> DiagramAnnotation | None:
        return self._annotations.get(image_id)

    def id_map(self, image_id: str) -> IdentifierMap | None:
        return self._maps.get(image_id)


class SampleIn(BaseModel):
    sample_id: str
    raw: str
    format: str = "idtvp"
    image_id: Optional[str] = None
    ground_truth: Optional[dict] = None
    identifier_map: Optional[list] = None


class SpecIn(BaseModel):
    ratio: Optional[str] = None
    iou_threshold: Optional[float] = None
    ned_threshold: Optional[float] = None


class RewardRequestIn(BaseModel):
    samples: list[SampleIn]
    spec: Optional[SpecIn] = None


def _effective_spec(base: RewardSpec, override: SpecIn | None) -> RewardSpec:
    if override is None:
        return base
    ratio = override.ratio or f"{base.soft_weight}:{base.hybrid_weight}"
    iou = override.iou_threshold if override.iou_threshold is not None else base.hybrid_config.iou_threshold
    ned = override.ned_threshold if override.ned_threshold is not None else base.hybrid_config.ned_threshold
    return RewardSpec.from_ratio(ratio, iou, ned)


def _score_sample(sample: SampleIn, store: GTStore, spec: RewardSpec) -> dict:
    out = {
        "sample_id": sample.sample_id,
        "reward": 0.0,
        "soft_component": 0.0,
        "hybrid_component": 0.0,
        "parse_ok": False,
    }
    if sample.format not in ("bros", "bivp", "idtvp"):
        out["error"] = f"unknown format {sample.format!r}"
        return out
    if sample.ground_truth is not None:
        try:
            ann = parse_ground_truth(json.dumps(sample.ground_truth))
        except AnnotationError as e:
            out["error"] = f"invalid inline ground truth: {e}"
            return out
    elif sample.image_id is not None:
        ann = store.annotation(sample.image_id)
        if ann is None:
            out["error"] = f"unknown image_id {sample.image_id!r}"
            return out
    else:
        out["error"] = "sample needs image_id or inline ground_truth"
        return out

    id_map = None
    if sample.identifier_map is not None:
        try:
            id_map = load_map(sample.identifier_map)
        except ValueError as e:
            out["error"] = f"invalid inline identifier_map: {e}"
            return out
    elif sample.image_id is not None:
        id_map = store.id_map(sample.image_id)

    result = sample_reward(sample.raw, ann, id_map, sample.format, spec)
    out.update(result.to_json())
    return out


def create_app(store: GTStore, spec: RewardSpec | None = None, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    base_spec = spec if spec is not None else RewardSpec()
    app = FastAPI(title="rxnkit reward service")

    @app.exception_handler(RequestValidationError)
    async def _envelope_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request envelope", "detail": exc.errors()})

    @app.get("/v1/health")
    def health():
        return {
            "status": "ready" if store.ready else "initializing",
            "loaded_gt_count": len(store),
            "spec": base_spec.to_json(),
            "max_batch": max_batch,
        }

    @app.post("/v1/reward")
    def reward_batch(req: RewardRequestIn):
        if len(req.samples) > max_batch:
            return JSONResponse(
                status_code=400,
                content={"error": f"batch size {len(req.samples)} exceeds maximum {max_batch}"},
            )
        ids = [s.sample_id for s in req.samples]
        if len(set(ids)) != len(ids):
            return JSONResponse(status_code=400, content={"error": "sample_ids must be unique within a request"})
        eff = _effective_spec(base_spec, req.spec)
        t0 = time.perf_counter()
        rewards = [_score_sample(s, store, eff) for s in req.samples]
        return {
            "rewards": rewards,
            "timing": {"total_ms": 1000.0 * (time.perf_counter() - t0), "samples": len(rewards)},
        }

    return app


def serve(
    gt_path: str,
    port: int = 8972,
    host: str = "127.0.0.1",
    spec: RewardSpec | None = None,
    max_batch: int = DEFAULT_MAX_BATCH,
    map_path: str | None = None,
):
    """Load the store and run the service. RXN_REWARD_PORT overrides port."""
    import uvicorn

    env_port = os.environ.get("RXN_REWARD_PORT")
    if env_port:
        port = int(env_port)
    store = GTStore().load(gt_path, map_path)
    app = create_app(store, spec, max_batch)
    uvicorn.run(app, host=host, port=port, log_level="warning")
