"""Rule-based refinement of LLM-extracted reaction records.

Three-step funnel over raw JSON records:

1. integrity validation - structurally broken records are dropped with all
   triggered reasons listed;
2. auto-correction - missing chemical names are imputed and the four role
   arrays are reconciled with each substance's role attribute so that the
   arrays partition the substance set exactly;
3. canonicalization and splitting - typography is normalized, carbon
   isotope notation is bracketed, and records whose product names join two
   chemicals with "and" are fissioned into independent reactions.

Records are plain dicts throughout: raw extractor output must be
representable even when it is broken.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from typing import Iterable

__all__ = [
    "Drop",
    "RefineResult",
    "validate_record",
    "autocorrect",
    "canonicalize_and_split",
    "refine_stream",
    "sanitize_text",
    "dump_record",
]

ROLE_SET = ("reactant", "catalyst", "reagent", "solvent")
ROLE_ARRAYS = ("reactants", "catalyst", "reagents", "solvent")
ROLE_TO_ARRAY = dict(zip(ROLE_SET, ROLE_ARRAYS))
ARRAY_TO_ROLE = dict(zip(ROLE_ARRAYS, ROLE_SET))

SUBSTANCE_FIELDS = ("idx", "content", "amount", "chemical_name", "is_identifier", "equivalence", "mmol", "role")
SUBSTANCE_MANDATORY = ("idx", "content", "chemical_name", "is_identifier", "role")
PRODUCT_FIELDS = (
    "content",
    "production",
    "yield_ratio",
    "conversion_rate",
    "stereo_selectivity",
    "ee",
    "dr",
    "rr",
    "appearance",
    "chemical_name",
    "is_identifier",
)
STAGE_FIELDS = (
    "stage_id",
    "substances",
    "time",
    "temperature",
    "atmosphere",
    "pressure",
    "PH",
    "stirring_speed",
    "vacuum_condition",
    "light_condition",
    "cooling_heating_condition",
    "workup",
)
PROCEDURE_FIELDS = ("paragraph", "substances") + ROLE_ARRAYS + ("products", "stages")
TOP_FIELDS = ("title", "id", "iupac_name", "mol_num", "step_id", "needs_keyword_extraction", "keyword", "procedure")

KEYWORD_KINDS = ("title", "id", "iupac_name", "method", "last_compound")
LAST_COMPOUND_SENTINEL = "__last_compound__"


@dataclass(frozen=True)
class Drop:
    """A rejected record with every triggered reason."""

    reasons: tuple[str, ...]
    index: int = -1
    record_id: str = ""
    title: str = ""

    def to_json(self) -> dict:
        return {"index": self.index, "id": self.record_id, "title": self.title, "reasons": list(self.reasons)}


# ---------------------------------------------------------------------------
# Text normalization
# ---------------------------------------------------------------------------

_QUOTES = str.maketrans(
    {
        "‘": "'",
        "’": "'",
        "‚": "'",
        "‛": "'",
        "′": "'",
        "“": '"',
        "”": '"',
        "„": '"',
        "″": '"',
    }
)
_HYPHEN_RUN = re.compile(r"-{2,}")
_SPACED_HYPHENS = re.compile(r"\s+(-\s+)+")
_WS_RUN = re.compile(r"\s+")
_ISOTOPE = re.compile(r"(?<![\w\[])(\d+)C-labeled")


def sanitize_text(s: str) -> str:
    """Normalize typography: straighten quotes, collapse hyphen runs and
    space-flanked hyphens, collapse whitespace, bracket carbon isotopes.
    Single intra-word hyphens are never touched. Idempotent."""
    s = s.translate(_QUOTES)
    s = _HYPHEN_RUN.sub("-", s)
    s = _SPACED_HYPHENS.sub(" ", s)
    s = _WS_RUN.sub(" ", s).strip()
    return _ISOTOPE.sub(r"[\g<1>C]-labeled", s)


_PERCENT = re.compile(r"(\d+(?:\.\d+)?)\s*%")
_NUMBER = re.compile(r"(\d+(?:\.\d+)?)")


def parse_yield(value) -> float | None:
    """First percentage-like token of a yield string; None if unparseable."""
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        return None
    m = _PERCENT.search(value) or _NUMBER.search(value)
    return float(m.group(1)) if m else None


# ---------------------------------------------------------------------------
# Step 1: integrity validation
# ---------------------------------------------------------------------------


def _nonempty_str(v) -> bool:
    return isinstance(v, str) and v.strip() != ""


def validate_record(record) -> Drop | None:
    """Apply every drop rule; returns a Drop listing all failures, or None."""
    reasons: list[str] = []
    if not isinstance(record, dict):
        return Drop(("not_an_object",))

    proc = record.get("procedure")
    paragraph = proc.get("paragraph") if isinstance(proc, dict) else None
    if not isinstance(proc, dict) or not _nonempty_str(paragraph):
        reasons.append("procedure_missing")
    elif len(sanitize_text(paragraph).split()) < 3:
        reasons.append("paragraph_too_short")
    proc = proc if isinstance(proc, dict) else {}

    substances = proc.get("substances")
    if not isinstance(substances, list) or not substances:
        reasons.append("substances_empty")
        substances = []
    reactants = proc.get("reactants")
    if not isinstance(reactants, list) or not reactants:
        reasons.append("reactants_empty")
    products = proc.get("products")
    if not isinstance(products, list) or not products:
        reasons.append("products_empty")
        products = []

    if not _nonempty_str(record.get("id")) and not _nonempty_str(record.get("iupac_name")):
        reasons.append("no_identifier")

    for i, sub in enumerate(substances):
        if not isinstance(sub, dict):
            reasons.append("substance_missing_field")
            continue
        if sub.get("idx") != i:
            reasons.append("idx_discontinuous")
        missing = [k for k in SUBSTANCE_MANDATORY if k not in sub]
        if missing:
            reasons.append("substance_missing_field")
        extraneous = [k for k in sub if k not in SUBSTANCE_FIELDS]
        if extraneous:
            reasons.append("substance_extraneous_keys")
        role = sub.get("role")
        if _nonempty_str(role) and role not in ROLE_SET:
            reasons.append("invalid_role")

    valid_idx = {s.get("idx") for s in substances if isinstance(s, dict)}
    for arr in ROLE_ARRAYS:
        for ptr in proc.get(arr) or []:
            if ptr not in valid_idx:
                reasons.append("dangling_idx")
    for stage in proc.get("stages") or []:
        if isinstance(stage, dict):
            for ptr in stage.get("substances") or []:
                if ptr not in valid_idx:
                    reasons.append("dangling_idx")

    for prod in products:
        if isinstance(prod, dict):
            y = parse_yield(prod.get("yield_ratio"))
            if y is not None and y > 100.0:
                reasons.append("yield_exceeds_100")

    keyword = record.get("keyword")
    if keyword is not None:
        ok = isinstance(keyword, list) and all(
            isinstance(kw, list)
            and len(kw) == 2
            and isinstance(kw[0], str)
            and kw[1] in KEYWORD_KINDS
            and (kw[1] != "last_compound" or kw[0] == LAST_COMPOUND_SENTINEL)
            for kw in keyword
        )
        if not ok:
            reasons.append("invalid_keyword")

    if reasons:
        # stable de-duplication keeps the reason list readable
        seen, unique = set(), []
        for r in reasons:
            if r not in seen:
                seen.add(r)
                unique.append(r)
        return Drop(tuple(unique), record_id=str(record.get("id", "")), title=str(record.get("title", "")))
    return None


# ---------------------------------------------------------------------------
# Step 2: auto-correction
# ---------------------------------------------------------------------------


def _fill_names(items, path: str, changes: list[dict]):
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            continue
        name = item.get("chemical_name")
        content = item.get("content")
        if not _nonempty_str(name) and _nonempty_str(content):
            changes.append(
                {"action": "fill_chemical_name", "path": f"{path}[{i}]", "from": name, "to": content}
            )
            item["chemical_name"] = content


def autocorrect(record: dict):
    """Repair a validated record; returns (corrected, changes) or Drop.

    Role arrays win over a conflicting role attribute; a substance in
    several arrays stays in the one matching its attribute (first array in
    reactants->catalyst->reagents->solvent order when the attribute
    conflicts too); a substance in no array is appended to the array its
    attribute names. A substance with neither is unassignable.
    """
    rec = copy.deepcopy(record)
    changes: list[dict] = []
    proc = rec["procedure"]
    _fill_names(proc.get("substances", []), "substances", changes)
    _fill_names(proc.get("products", []), "products", changes)

    for arr in ROLE_ARRAYS:
        proc.setdefault(arr, [])

    for i, sub in enumerate(proc.get("substances", [])):
        idx = sub["idx"]
        attr = sub.get("role") if _nonempty_str(sub.get("role")) else None
        attr_array = ROLE_TO_ARRAY.get(attr)
        memberships = [arr for arr in ROLE_ARRAYS if idx in proc[arr]]
        if not memberships:
            if attr_array is None:
                return Drop(("role_unassignable",), record_id=str(rec.get("id", "")), title=str(rec.get("title", "")))
            proc[attr_array].append(idx)
            changes.append({"action": "append_role_array", "path": f"substances[{i}]", "to": attr_array})
            continue
        keep = attr_array if attr_array in memberships else memberships[0]
        for arr in memberships:
            if arr != keep:
                proc[arr] = [p for p in proc[arr] if p != idx]
                changes.append(
                    {"action": "remove_duplicate_membership", "path": f"substances[{i}]", "from": arr, "to": keep}
                )
        if attr != ARRAY_TO_ROLE[keep]:
            changes.append(
                {"action": "rewrite_role_attr", "path": f"substances[{i}]", "from": attr, "to": ARRAY_TO_ROLE[keep]}
            )
            sub["role"] = ARRAY_TO_ROLE[keep]
    return rec, changes


# ---------------------------------------------------------------------------
# Step 3: canonicalization & splitting
# ---------------------------------------------------------------------------


def _sanitize_tree(node, path: str, changes: list[dict]):
    if isinstance(node, str):
        out = sanitize_text(node)
        if out != node:
            changes.append({"action": "normalize", "path": path, "from": node, "to": out})
        return out
    if isinstance(node, list):
        return [_sanitize_tree(v, f"{path}[{i}]", changes) for i, v in enumerate(node)]
    if isinstance(node, dict):
        return {k: _sanitize_tree(v, f"{path}.{k}" if path else k, changes) for k, v in node.items()}
    return node


_TOKEN_HAS_ALNUM = re.compile(r"[0-9A-Za-z]")


def _split_name(name: str) -> list[str]:
    parts = [p.strip() for p in name.split(" and ")]
    if len(parts) > 1 and all(p and _TOKEN_HAS_ALNUM.search(p) for p in parts):
        return parts
    return [name]


def canonicalize_and_split(record: dict):
    """Returns (standard records, changes). Fission happens when the record
    iupac_name or a product chemical_name conjoins two chemical names with
    a standalone "and"; every other field is shared between the parts."""
    changes: list[dict] = []
    rec = _sanitize_tree(copy.deepcopy(record), "", changes)

    records = [rec]
    name = rec.get("iupac_name")
    if _nonempty_str(name):
        parts = _split_name(name)
        if len(parts) > 1:
            changes.append({"action": "split", "path": "iupac_name", "into": len(parts)})
            records = []
            for part in parts:
                dup = copy.deepcopy(rec)
                dup["iupac_name"] = part
                records.append(dup)

    out: list[dict] = []
    for r in records:
        queue = [r]
        products = r.get("procedure", {}).get("products", [])
        for pi, prod in enumerate(products):
            if not isinstance(prod, dict) or not _nonempty_str(prod.get("chemical_name")):
                continue
            parts = _split_name(prod["chemical_name"])
            if len(parts) == 1:
                continue
            changes.append({"action": "split", "path": f"products[{pi}].chemical_name", "into": len(parts)})
            next_queue = []
            for item in queue:
                for part in parts:
                    dup = copy.deepcopy(item)
                    dup["procedure"]["products"][pi]["chemical_name"] = part
                    next_queue.append(dup)
            queue = next_queue
        out.extend(queue)
    return out, changes


# ---------------------------------------------------------------------------
# The funnel
# ---------------------------------------------------------------------------


@dataclass
class RefineResult:
    standards: list[dict] = field(default_factory=list)
    drops: list[Drop] = field(default_factory=list)
    changelog: list[dict] = field(default_factory=list)
    inputs: int = 0
    survivors: int = 0  # records that passed the funnel, before splitting

    def conserved(self) -> bool:
        return self.inputs == self.survivors + len(self.drops)


def refine_stream(records: Iterable[dict | str]) -> RefineResult:
    """Run every record through validate -> autocorrect -> canonicalize.

    Output order is stable with respect to input order. Unparseable lines
    are drops (reason invalid_json), never exceptions.
    """
    result = RefineResult()
    for i, raw in enumerate(records):
        result.inputs += 1
        if isinstance(raw, (str, bytes)):
            stripped = raw.strip()
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError:
                result.drops.append(Drop(("invalid_json",), index=i))
                continue
        else:
            record = raw
        drop = validate_record(record)
        if drop is not None:
            result.drops.append(Drop(drop.reasons, i, drop.record_id, drop.title))
            continue
        corrected = autocorrect(record)
        if isinstance(corrected, Drop):
            result.drops.append(Drop(corrected.reasons, i, corrected.record_id, corrected.title))
            continue
        rec, changes = corrected
        standards, more = canonicalize_and_split(rec)
        result.survivors += 1
        result.standards.extend(standards)
        all_changes = changes + more
        if all_changes or len(standards) != 1:
            result.changelog.append({"index": i, "changes": all_changes, "split_into": len(standards)})
    return result


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------


def _ordered(obj: dict, known: tuple[str, ...]) -> dict:
    out = {k: obj[k] for k in known if k in obj}
    out.update({k: obj[k] for k in sorted(obj) if k not in known})
    return out


def dump_record(record: dict) -> str:
    """One-line JSON with a fixed field order, for byte-stable outputs."""
    rec = _ordered(record, TOP_FIELDS)
    proc = rec.get("procedure")
    if isinstance(proc, dict):
        proc = _ordered(proc, PROCEDURE_FIELDS)
        if "substances" in proc:
            proc["substances"] = [
                _ordered(s, SUBSTANCE_FIELDS) if isinstance(s, dict) else s for s in proc.get("substances", [])
            ]
        if "products" in proc:
            proc["products"] = [
                _ordered(p, PRODUCT_FIELDS) if isinstance(p, dict) else p for p in proc.get("products", [])
            ]
        if "stages" in proc:
            proc["stages"] = [
                _ordered(s, STAGE_FIELDS) if isinstance(s, dict) else s for s in proc.get("stages", [])
            ]
        rec["procedure"] = proc
    return json.dumps(rec, ensure_ascii=False)
