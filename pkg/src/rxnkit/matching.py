"""Set matching between predicted and ground-truth reactions.

Two per-reaction criteria:

* soft: ignores all text and merges condition molecules into reactants,
  then requires a perfect one-to-one IoU > threshold pairing per merged
  group (reactants+conditions; products), equal cardinality per group.
* hybrid: keeps roles separate. For bivp/idtvp output, molecules pair on
  IoU > threshold and texts pair on normalized edit distance <= threshold;
  for bros output every box-bearing component pairs on IoU and text is not
  scored.

Whole sets are assigned by maximum-cardinality bipartite matching over the
pairwise predicate, which is what makes the downstream reward invariant
under any reordering of the prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .model import (
    Box,
    DiagramAnnotation,
    ParseFailure,
    PredictionRecord,
    Reaction,
    normalize_text,
    parse_prediction,
)
from .idmap import IdentifierMap, resolve, resolve_annotation

__all__ = [
    "MatchConfig",
    "Assignment",
    "PRF1",
    "MatchReport",
    "iou",
    "normalized_edit_distance",
    "reaction_matches_soft",
    "reaction_matches_hybrid",
    "match_sets",
    "evaluate_corpus",
]

CRITERIA = ("soft", "hybrid")


@dataclass(frozen=True)
class MatchConfig:
    iou_threshold: float = 0.5
    ned_threshold: float = 0.2
    criterion: str = "soft"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in (0, 1]")
        if not 0.0 <= self.ned_threshold < 1.0:
            raise ValueError("ned_threshold must be in [0, 1)")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_pred)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gt)


@dataclass(frozen=True)
class PRF1:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF1":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2.0 * p * r / (p + r) if p + r else 0.0
        return cls(tp, fp, fn, p, r, f1)

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 1 iff equal, 0 iff disjoint."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def normalized_edit_distance(a: str, b: str) -> float:
    """Levenshtein distance over NFC + whitespace-collapsed strings, divided
    by the longer length. Two empty strings are at distance 0."""
    na, nb = normalize_text(a), normalize_text(b)
    if not na and not nb:
        return 0.0
    ca = np.array([ord(c) for c in na], dtype=np.int32)
    cb = np.array([ord(c) for c in nb], dtype=np.int32)
    return _kernels.levenshtein_codes(ca, cb) / max(len(na), len(nb))


class UnresolvedReference(ValueError):
    pass


def _boxes(components: Sequence) -> np.ndarray:
    arr = np.empty((len(components), 4), dtype=np.float64)
    for i, c in enumerate(components):
        if c.box is None:
            raise UnresolvedReference(
                f"molecule component is not box-resolved: {c.identifier or c.box_index!r}"
            )
        arr[i, 0], arr[i, 1], arr[i, 2], arr[i, 3] = c.box.x1, c.box.y1, c.box.x2, c.box.y2
    return arr


def _perfect_box_pairing(pred, gt, thr: float) -> bool:
    if len(pred) != len(gt):
        return False
    if not pred:
        return True
    adj = _kernels.iou_matrix(_boxes(pred), _boxes(gt)) > thr
    card, _, _ = _kernels.max_bipartite_matching(np.ascontiguousarray(adj))
    return card == len(pred)


def _perfect_text_pairing(pred, gt, thr: float) -> bool:
    if len(pred) != len(gt):
        return False
    if not pred:
        return True
    adj = np.zeros((len(pred), len(gt)), dtype=bool)
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            adj[i, j] = normalized_edit_distance(p.text, g.text) <= thr
    card, _, _ = _kernels.max_bipartite_matching(adj)
    return card == len(pred)


def reaction_matches_soft(pred: Reaction, gt: Reaction, cfg: MatchConfig) -> bool:
    """Text dropped, conditions merged into reactants, boxes paired per group."""
    pred_head = pred.molecules("reactants") + pred.molecules("conditions")
    gt_head = gt.molecules("reactants") + gt.molecules("conditions")
    return _perfect_box_pairing(pred_head, gt_head, cfg.iou_threshold) and _perfect_box_pairing(
        pred.molecules("products"), gt.molecules("products"), cfg.iou_threshold
    )


def reaction_matches_hybrid(pred: Reaction, gt: Reaction, cfg: MatchConfig, fmt: str = "idtvp") -> bool:
    """Role-separated match; text scored by edit distance except under bros,
    which pairs boxes only (the hard-match convention)."""
    for role in ("reactants", "conditions", "products"):
        if not _perfect_box_pairing(pred.molecules(role), gt.molecules(role), cfg.iou_threshold):
            return False
        if fmt != "bros":
            if not _perfect_text_pairing(pred.texts(role), gt.texts(role), cfg.ned_threshold):
                return False
    return True


def _predicate(cfg: MatchConfig, fmt: str) -> Callable[[Reaction, Reaction], bool]:
    if cfg.criterion == "soft":
        return lambda p, g: reaction_matches_soft(p, g, cfg)
    return lambda p, g: reaction_matches_hybrid(p, g, cfg, fmt)


def match_relation(
    preds: Sequence[Reaction],
    gts: Sequence[Reaction],
    cfg: MatchConfig,
    fmt: str = "idtvp",
    matchable: Sequence[bool] | None = None,
) -> np.ndarray:
    """Boolean (n_pred, n_gt) pairwise match relation under the criterion."""
    pred_fn = _predicate(cfg, fmt)
    adj = np.zeros((len(preds), len(gts)), dtype=bool)
    for i, p in enumerate(preds):
        if matchable is not None and not matchable[i]:
            continue
        for j, g in enumerate(gts):
            adj[i, j] = pred_fn(p, g)
    return adj


def match_sets(
    preds: Sequence[Reaction],
    gts: Sequence[Reaction],
    cfg: MatchConfig,
    fmt: str = "idtvp",
    matchable: Sequence[bool] | None = None,
) -> Assignment:
    """Maximum-cardinality one-to-one assignment over the match relation.

    Deliberately not greedy: greedy first-fit is order dependent, and the
    reward contract requires the score to be a function of the *set* of
    predicted reactions. Duplicate predictions of one correct reaction
    therefore leave all but one unmatched.
    """
    adj = match_relation(preds, gts, cfg, fmt, matchable)
    _, match_l, _ = _kernels.max_bipartite_matching(adj)
    pairs = tuple((i, int(match_l[i])) for i in range(len(preds)) if match_l[i] >= 0)
    matched_gt = {j for _, j in pairs}
    return Assignment(
        pairs=pairs,
        unmatched_pred=tuple(i for i in range(len(preds)) if match_l[i] < 0),
        unmatched_gt=tuple(j for j in range(len(gts)) if j not in matched_gt),
    )


# ---------------------------------------------------------------------------
# Corpus evaluation
# ---------------------------------------------------------------------------


@dataclass
class MatchReport:
    """Micro-aggregated corpus metrics, overall and per diagram type."""

    criteria: dict[str, PRF1]
    by_type: dict[str, dict[str, PRF1]]
    images: int = 0
    parse_failures: int = 0

    def to_json(self) -> dict:
        return {
            "images": self.images,
            "parse_failures": self.parse_failures,
            "overall": {c: m.to_json() for c, m in self.criteria.items()},
            "by_type": {t: {c: m.to_json() for c, m in row.items()} for t, row in self.by_type.items()},
        }

    def to_text(self) -> str:
        def fmt_row(label: str, row: Mapping[str, PRF1]) -> str:
            cells = []
            for c in sorted(row):
                m = row[c]
                cells.append(f"{100 * m.precision:6.2f} {100 * m.recall:6.2f} {100 * m.f1:6.2f}")
            return f"{label:<12} " + "   ".join(cells)

        crits = sorted(self.criteria)
        header = f"{'':<12} " + "   ".join(f"{c + ' (P/R/F1 %)':<20}" for c in crits)
        lines = [
            f"images evaluated: {self.images} (parse failures: {self.parse_failures})",
            header,
            fmt_row("overall", self.criteria),
        ]
        for t in sorted(self.by_type):
            lines.append(fmt_row(t, self.by_type[t]))
        return "\n".join(lines)


@dataclass
class _Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, tp: int, fp: int, fn: int):
        self.tp += tp
        self.fp += fp
        self.fn += fn


def image_counts(
    record: PredictionRecord | None,
    ann: DiagramAnnotation,
    cfg: MatchConfig,
    id_map: IdentifierMap | None = None,
) -> tuple[int, int, int, bool]:
    """(tp, fp, fn, parse_ok) for one image under one criterion.

    A missing or unparseable prediction contributes fp=0, fn=|gts|.
    """
    gts = resolve_annotation(ann)
    if record is None:
        return 0, 0, len(gts), True
    parsed = parse_prediction(record.raw, record.format)
    if isinstance(parsed, ParseFailure):
        return 0, 0, len(gts), False
    if record.format == "bros":
        preds, matchable = parsed.reactions, None
    else:
        mapping = id_map if id_map is not None else IdentifierMap.from_annotation(ann)
        resolved = resolve(parsed, mapping)
        bad = {i for i, _ in resolved.unresolved}
        preds = resolved.reactions
        matchable = [i not in bad for i in range(len(preds))]
    asn = match_sets(preds, gts, cfg, record.format, matchable)
    return asn.tp, asn.fp, asn.fn, True


def evaluate_corpus(
    gt_store: Mapping[str, DiagramAnnotation],
    records: Iterable[PredictionRecord],
    configs: Mapping[str, MatchConfig] | None = None,
    id_maps: Mapping[str, IdentifierMap] | None = None,
    jobs: int = 1,
) -> MatchReport:
    """Micro-aggregated P/R/F1 over a corpus, per criterion and diagram type.

    Every ground-truth image counts: images without a prediction record
    contribute their reactions as false negatives. Prediction image_ids
    must be a subset of the ground truth, with no duplicates. Per-image
    work fans out over `jobs` threads; aggregation is order-independent.
    """
    if configs is None:
        configs = {
            "soft": MatchConfig(criterion="soft"),
            "hybrid": MatchConfig(criterion="hybrid"),
        }
    by_image: dict[str, PredictionRecord] = {}
    for rec in records:
        if rec.image_id in by_image:
            raise ValueError(f"duplicate image_id in predictions: {rec.image_id!r}")
        if rec.image_id not in gt_store:
            raise ValueError(f"prediction for unknown image_id: {rec.image_id!r}")
        by_image[rec.image_id] = rec

    def one_image(image_id: str):
        ann = gt_store[image_id]
        rec = by_image.get(image_id)
        id_map = id_maps.get(image_id) if id_maps else None
        row = {}
        failed = False
        for crit, cfg in configs.items():
            tp, fp, fn, ok = image_counts(rec, ann, cfg, id_map)
            row[crit] = (tp, fp, fn)
            failed = failed or not ok
        return ann.diagram_type or "unknown", row, failed

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_image, gt_store))
    else:
        results = [one_image(image_id) for image_id in gt_store]

    overall = {c: _Counts() for c in configs}
    per_type: dict[str, dict[str, _Counts]] = {}
    failures = 0
    for dtype, row, failed in results:
        bucket = per_type.setdefault(dtype, {c: _Counts() for c in configs})
        for crit, (tp, fp, fn) in row.items():
            overall[crit].add(tp, fp, fn)
            bucket[crit].add(tp, fp, fn)
        if failed:
            failures += 1

    return MatchReport(
        criteria={c: PRF1.from_counts(k.tp, k.fp, k.fn) for c, k in overall.items()},
        by_type={
            t: {c: PRF1.from_counts(k.tp, k.fp, k.fn) for c, k in row.items()}
            for t, row in per_type.items()
        },
        images=len(gt_store),
        parse_failures=failures,
    )


def report_to_json_text(report: MatchReport) -> str:
    return json.dumps(report.to_json(), ensure_ascii=False, indent=2)
