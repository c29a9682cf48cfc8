"""Per-sample verifiable reward for reaction-set predictions.

The reward is a weighted average of the sample's soft-match F1 and
hybrid-match F1 against the ground truth. Because both F1 values come from
maximum-cardinality set assignment, the reward is invariant under any
reordering of reactions or of components within a role. Output that cannot
be parsed at all is worth exactly 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .idmap import IdentifierMap, resolve, resolve_annotation
from .matching import Assignment, MatchConfig, match_sets
from .model import DiagramAnnotation, ParseFailure, parse_prediction

__all__ = ["RewardSpec", "RewardResult", "sample_reward", "set_f1"]


@dataclass(frozen=True)
class RewardSpec:
    """Soft:hybrid weighting plus the per-criterion thresholds."""

    soft_weight: float = 0.5
    hybrid_weight: float = 0.5
    soft_config: MatchConfig = field(default_factory=lambda: MatchConfig(criterion="soft"))
    hybrid_config: MatchConfig = field(default_factory=lambda: MatchConfig(criterion="hybrid"))

    def __post_init__(self):
        if self.soft_weight < 0 or self.hybrid_weight < 0:
            raise ValueError("weights must be non-negative")
        if abs(self.soft_weight + self.hybrid_weight - 1.0) > 1e-9:
            raise ValueError("soft_weight + hybrid_weight must equal 1")
        if self.soft_config.criterion != "soft" or self.hybrid_config.criterion != "hybrid":
            raise ValueError("configs must carry their own criterion")

    @classmethod
    def from_ratio(cls, ratio: str, iou_threshold: float = 0.5, ned_threshold: float = 0.2) -> "RewardSpec":
        """Build from "<soft>:<hybrid>" notation, e.g. "1:0", "0:1", "1:1"."""
        try:
            s_raw, h_raw = ratio.split(":")
            s, h = float(s_raw), float(h_raw)
        except ValueError:
            raise ValueError(f"ratio must look like '1:1', got {ratio!r}") from None
        if s < 0 or h < 0 or s + h == 0:
            raise ValueError("ratio parts must be non-negative and not both zero")
        return cls(
            soft_weight=s / (s + h),
            hybrid_weight=h / (s + h),
            soft_config=MatchConfig(iou_threshold, ned_threshold, "soft"),
            hybrid_config=MatchConfig(iou_threshold, ned_threshold, "hybrid"),
        )

    def to_json(self) -> dict:
        return {
            "soft_weight": self.soft_weight,
            "hybrid_weight": self.hybrid_weight,
            "iou_threshold": self.hybrid_config.iou_threshold,
            "ned_threshold": self.hybrid_config.ned_threshold,
        }


@dataclass(frozen=True)
class RewardResult:
    reward: float
    soft_component: float
    hybrid_component: float
    parse_ok: bool
    detail: dict

    def to_json(self) -> dict:
        return {
            "reward": self.reward,
            "soft_component": self.soft_component,
            "hybrid_component": self.hybrid_component,
            "parse_ok": self.parse_ok,
            "detail": self.detail,
        }


def set_f1(assignment: Assignment, n_pred: int, n_gt: int) -> float:
    """Per-sample F1. An empty prediction against an empty ground truth is
    perfect (1.0); everything else follows the usual 0-denominator rules."""
    if n_pred == 0 and n_gt == 0:
        return 1.0
    p = assignment.tp / n_pred if n_pred else 0.0
    r = assignment.tp / n_gt if n_gt else 0.0
    return 2.0 * p * r / (p + r) if p + r else 0.0


def _counts(a: Assignment) -> dict:
    return {"tp": a.tp, "fp": a.fp, "fn": a.fn}


def sample_reward(
    raw: str,
    gt: DiagramAnnotation,
    id_map: IdentifierMap | None = None,
    fmt: str = "idtvp",
    spec: RewardSpec | None = None,
) -> RewardResult:
    """Score one rollout against one annotated diagram.

    All failure paths map into the result: unparseable output scores 0 with
    parse_ok=False; an unresolvable identifier makes only that reaction
    unmatchable. The result is bit-for-bit deterministic in its inputs.
    """
    if spec is None:
        spec = RewardSpec()
    parsed = parse_prediction(raw, fmt)
    if isinstance(parsed, ParseFailure):
        return RewardResult(
            reward=0.0,
            soft_component=0.0,
            hybrid_component=0.0,
            parse_ok=False,
            detail={"failure": parsed.kind, "message": parsed.message},
        )

    gts = resolve_annotation(gt)
    if fmt == "bros":
        preds, matchable, unresolved = parsed.reactions, None, ()
    else:
        mapping = id_map if id_map is not None else IdentifierMap.from_annotation(gt)
        res = resolve(parsed, mapping)
        bad = {i for i, _ in res.unresolved}
        preds = res.reactions
        matchable = [i not in bad for i in range(len(preds))]
        unresolved = tuple(h for _, h in res.unresolved)

    soft = match_sets(preds, gts, spec.soft_config, fmt, matchable)
    hybrid = match_sets(preds, gts, spec.hybrid_config, fmt, matchable)
    soft_f1 = set_f1(soft, len(preds), len(gts))
    hybrid_f1 = set_f1(hybrid, len(preds), len(gts))
    detail = {"soft": _counts(soft), "hybrid": _counts(hybrid)}
    if unresolved:
        detail["unresolved"] = list(unresolved)
    if parsed.warnings:
        detail["warnings"] = list(parsed.warnings)
    return RewardResult(
        reward=spec.soft_weight * soft_f1 + spec.hybrid_weight * hybrid_f1,
        soft_component=soft_f1,
        hybrid_component=hybrid_f1,
        parse_ok=True,
        detail=detail,
    )
