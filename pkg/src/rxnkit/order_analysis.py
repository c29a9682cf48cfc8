"""Serialization-order analysis of set-perfect predictions.

A sample qualifies when its prediction is chemically perfect under hybrid
matching (precision = recall = 1). Among qualifying samples we count how
often the *order* of the predicted reaction list disagrees with the ground
truth: each matched prediction sitting at a different list position than
its partner is one misplacement. The pairing used is the perfect matching
with the fewest misplacements, so a set-equal prediction in canonical
order always scores zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .idmap import IdentifierMap, resolve, resolve_annotation
from .matching import MatchConfig, match_relation
from .model import DiagramAnnotation, ParseFailure, PredictionRecord, parse_prediction

__all__ = ["OrderCheck", "OrderReport", "order_inconsistency", "corpus_rates", "rate_percent"]

_BIG = 10**6


def rate_percent(errors: int, total: int) -> float:
    """errors/total as a percentage rounded to two decimals (0 when empty)."""
    return round(100.0 * errors / total, 2) if total else 0.0


@dataclass(frozen=True)
class OrderCheck:
    perfect: bool
    misplacements: int
    n_reactions: int


@dataclass(frozen=True)
class OrderReport:
    image_total: int
    image_errors: int
    reaction_total: int
    reaction_errors: int
    excluded_single_reaction_images: int

    @property
    def image_rate(self) -> float:
        return self.image_errors / self.image_total if self.image_total else 0.0

    @property
    def reaction_rate(self) -> float:
        return self.reaction_errors / self.reaction_total if self.reaction_total else 0.0

    def to_json(self) -> dict:
        return {
            "image_level": {
                "total": self.image_total,
                "errors": self.image_errors,
                "rate_percent": rate_percent(self.image_errors, self.image_total),
            },
            "reaction_level": {
                "total": self.reaction_total,
                "errors": self.reaction_errors,
                "rate_percent": rate_percent(self.reaction_errors, self.reaction_total),
            },
            "excluded_single_reaction_images": self.excluded_single_reaction_images,
        }

    def to_text(self) -> str:
        return "\n".join(
            [
                f"{'level':<10} {'Total':>8} {'Errors':>8} {'Rate (%)':>9}",
                f"{'image':<10} {self.image_total:>8} {self.image_errors:>8} "
                f"{rate_percent(self.image_errors, self.image_total):>9.2f}",
                f"{'reaction':<10} {self.reaction_total:>8} {self.reaction_errors:>8} "
                f"{rate_percent(self.reaction_errors, self.reaction_total):>9.2f}",
                f"single-reaction images excluded at image level: {self.excluded_single_reaction_images}",
            ]
        )


def _min_misplacement_pairs(adj: np.ndarray) -> int:
    """Misplacement count of the perfect matching with the most fixed points.

    Requires that a perfect matching exists (callers check first). Solved as
    an assignment problem: matching identity pairs cost 0, other matching
    pairs cost 1, non-matching pairs a prohibitive constant.
    """
    n = adj.shape[0]
    if n == 0:
        return 0
    cost = np.where(adj, 1.0, float(_BIG))
    cost[np.arange(n), np.arange(n)] = np.where(np.diag(adj), 0.0, float(_BIG))
    rows, cols = linear_sum_assignment(cost)
    return int(sum(1 for i, j in zip(rows, cols) if i != j))


def order_inconsistency(
    record: PredictionRecord,
    ann: DiagramAnnotation,
    cfg: MatchConfig | None = None,
    id_map: IdentifierMap | None = None,
) -> OrderCheck:
    """Is this prediction set-perfect, and if so how many reactions sit at
    the wrong list position?"""
    if cfg is None:
        cfg = MatchConfig(criterion="hybrid")
    gts = resolve_annotation(ann)
    parsed = parse_prediction(record.raw, record.format)
    if isinstance(parsed, ParseFailure):
        return OrderCheck(False, 0, len(gts))
    if record.format == "bros":
        preds, matchable = parsed.reactions, None
    else:
        mapping = id_map if id_map is not None else IdentifierMap.from_annotation(ann)
        res = resolve(parsed, mapping)
        bad = {i for i, _ in res.unresolved}
        preds = res.reactions
        matchable = [i not in bad for i in range(len(preds))]
    if len(preds) != len(gts):
        return OrderCheck(False, 0, len(gts))
    adj = match_relation(preds, gts, cfg, record.format, matchable)
    from . import _kernels

    card, _, _ = _kernels.max_bipartite_matching(adj)
    if card != len(gts):
        return OrderCheck(False, 0, len(gts))
    return OrderCheck(True, _min_misplacement_pairs(adj), len(gts))


def corpus_rates(
    pairs: Iterable[tuple[PredictionRecord, DiagramAnnotation]],
    cfg: MatchConfig | None = None,
    id_maps: dict[str, IdentifierMap] | None = None,
) -> OrderReport:
    """Aggregate order statistics over set-perfect samples only.

    Image-level totals exclude single-reaction images; reaction-level totals
    include every reaction of every perfect image.
    """
    image_total = image_errors = 0
    reaction_total = reaction_errors = 0
    excluded = 0
    for record, ann in pairs:
        id_map = id_maps.get(ann.image_id) if id_maps else None
        check = order_inconsistency(record, ann, cfg, id_map)
        if not check.perfect:
            continue
        reaction_total += check.n_reactions
        reaction_errors += check.misplacements
        if check.n_reactions >= 2:
            image_total += 1
            if check.misplacements:
                image_errors += 1
        else:
            excluded += 1
    return OrderReport(image_total, image_errors, reaction_total, reaction_errors, excluded)
