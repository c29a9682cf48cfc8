"""Joining visual reaction parses with refined textual records.

Both sides speak the author's native molecule identifiers, so the join key
is the intersection of product identifier sets. Joined pairs support two
annotations: precision refinement (visual text strings corrected from close
textual fields, gated by edit distance) and contextual enrichment (yield,
temperature and similar attributes attached from the text with their source
stage ids). Both are additive, logged annotations; molecule components are
never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .matching import normalized_edit_distance
from .model import Component, Reaction

__all__ = ["JoinedReaction", "join", "refine_text", "enrich"]

STAGE_CONDITION_FIELDS = (
    "time",
    "temperature",
    "atmosphere",
    "pressure",
    "PH",
    "stirring_speed",
    "vacuum_condition",
    "light_condition",
    "cooling_heating_condition",
)
PRODUCT_ENRICH_FIELDS = ("yield_ratio", "production", "appearance")
STAGE_ENRICH_FIELDS = ("time", "temperature", "atmosphere", "pressure")


@dataclass(frozen=True)
class JoinedReaction:
    visual_index: int
    visual: Reaction
    textual_index: int
    refinements: tuple[dict, ...] = ()
    enrichments: dict = field(default_factory=dict)
    flags: tuple[dict, ...] = ()


def _nonempty(v) -> bool:
    return isinstance(v, str) and v.strip() != ""


def _visual_ids(rx: Reaction, role: str) -> set[str]:
    return {c.identifier for c in rx.molecules(role) if c.identifier is not None}


def _textual_product_ids(rec: dict) -> set[str]:
    ids: set[str] = set()
    for p in rec.get("procedure", {}).get("products", []) or []:
        if isinstance(p, dict) and p.get("is_identifier") and _nonempty(p.get("content")):
            ids.add(p["content"].strip())
    if _nonempty(rec.get("id")):
        ids.add(rec["id"].strip())
    return ids


def _textual_reactant_ids(rec: dict) -> set[str]:
    proc = rec.get("procedure", {})
    substances = proc.get("substances", []) or []
    by_idx = {s.get("idx"): s for s in substances if isinstance(s, dict)}
    ids: set[str] = set()
    for ptr in proc.get("reactants", []) or []:
        s = by_idx.get(ptr)
        if s and s.get("is_identifier") and _nonempty(s.get("content")):
            ids.add(s["content"].strip())
    return ids


def join(
    visual: list[Reaction], textual: list[dict]
) -> tuple[list[JoinedReaction], list[int], list[int]]:
    """Pair each visual reaction with at most one textual record.

    The key is product-identifier intersection; ties break by largest
    reactant-identifier overlap, then earliest textual record. Returns
    (joined, orphan visual indices, orphan textual indices).
    """
    t_products = [_textual_product_ids(rec) for rec in textual]
    t_reactants = [_textual_reactant_ids(rec) for rec in textual]
    joined: list[JoinedReaction] = []
    orphan_visual: list[int] = []
    used_textual: set[int] = set()
    for vi, rx in enumerate(visual):
        v_products = _visual_ids(rx, "products")
        v_reactants = _visual_ids(rx, "reactants")
        best, best_overlap = -1, -1
        for ti in range(len(textual)):
            if not (v_products & t_products[ti]):
                continue
            overlap = len(v_reactants & t_reactants[ti])
            if overlap > best_overlap:
                best, best_overlap = ti, overlap
        if best < 0:
            orphan_visual.append(vi)
        else:
            joined.append(JoinedReaction(visual_index=vi, visual=rx, textual_index=best))
            used_textual.add(best)
    orphan_textual = [ti for ti in range(len(textual)) if ti not in used_textual]
    return joined, orphan_visual, orphan_textual


def _candidate_strings(rec: dict) -> list[tuple[str, str]]:
    """(value, source) pairs a visual text component may be corrected from:
    stage condition fields in stage order, then substance content strings."""
    out: list[tuple[str, str]] = []
    proc = rec.get("procedure", {})
    for stage in proc.get("stages", []) or []:
        if not isinstance(stage, dict):
            continue
        sid = str(stage.get("stage_id", ""))
        for f in STAGE_CONDITION_FIELDS:
            if _nonempty(stage.get(f)):
                out.append((stage[f], f"stage:{sid}.{f}"))
    for s in proc.get("substances", []) or []:
        if isinstance(s, dict) and _nonempty(s.get("content")):
            out.append((s["content"], f"substance:{s.get('idx')}"))
    return out


def refine_text(j: JoinedReaction, textual: list[dict], ned_gate: float = 0.3) -> JoinedReaction:
    """Replace visual text components by their closest textual field when the
    normalized edit distance is in (0, ned_gate]; distances above the gate
    only flag the component as low confidence. Molecules are untouched."""
    candidates = _candidate_strings(textual[j.textual_index])
    if not candidates:
        return j
    refinements = list(j.refinements)
    flags = list(j.flags)
    roles = {}
    for role in ("reactants", "conditions", "products"):
        comps = []
        for ci, c in enumerate(j.visual.role(role)):
            if c.is_molecule:
                comps.append(c)
                continue
            best_value, best_source, best_ned = None, None, 2.0
            for value, source in candidates:
                ned = normalized_edit_distance(c.text, value)
                if ned < best_ned:
                    best_value, best_source, best_ned = value, source, ned
            if best_ned == 0.0:
                comps.append(c)  # already identical, nothing to record
            elif best_ned <= ned_gate:
                refinements.append(
                    {
                        "component": f"{role}[{ci}]",
                        "original": c.text,
                        "replacement": best_value,
                        "ned": best_ned,
                        "source": best_source,
                    }
                )
                comps.append(Component.of_text(best_value))
            else:
                flags.append({"component": f"{role}[{ci}]", "text": c.text, "closest_ned": best_ned})
                comps.append(c)
        roles[role] = tuple(comps)
    return replace(j, visual=Reaction(**roles), refinements=tuple(refinements), flags=tuple(flags))


def enrich(j: JoinedReaction, textual: list[dict]) -> JoinedReaction:
    """Attach text-only attributes (yield, conditions) with their sources.

    Product attributes come from the textual product the join keyed on;
    stage attributes carry their stage_id. Purely additive: the visual
    reaction is bit-identical before and after."""
    rec = textual[j.textual_index]
    proc = rec.get("procedure", {})
    products = [p for p in proc.get("products", []) or [] if isinstance(p, dict)]
    v_products = _visual_ids(j.visual, "products")
    matched = next(
        (p for p in products if p.get("is_identifier") and str(p.get("content", "")).strip() in v_products),
        products[0] if products else None,
    )
    enrichments: dict[str, list[dict]] = {}
    if matched is not None:
        for f in PRODUCT_ENRICH_FIELDS:
            if _nonempty(matched.get(f)):
                enrichments.setdefault(f, []).append({"value": matched[f], "stage_id": None})
    for stage in proc.get("stages", []) or []:
        if not isinstance(stage, dict):
            continue
        sid = stage.get("stage_id")
        for f in STAGE_ENRICH_FIELDS:
            if _nonempty(stage.get(f)):
                enrichments.setdefault(f, []).append({"value": stage[f], "stage_id": sid})
    merged = {k: list(v) for k, v in j.enrichments.items()}
    for k, vals in enrichments.items():
        merged.setdefault(k, []).extend(vals)
    return replace(j, enrichments=merged)
