"""Identifier-to-box maps.

A detector emits, per image, the molecule boxes it localized together with
the printed identifiers it read next to them; molecules without a printed
label get a synthesized ("virtual") identifier. This module loads those
records, synthesizes virtual identifiers deterministically, and resolves
identifier- or index-based predictions into box space for matching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .model import (
    Box,
    Component,
    DiagramAnnotation,
    ParsedPrediction,
    Reaction,
)

__all__ = [
    "IdentifierMap",
    "MapEntry",
    "ResolvedPrediction",
    "load_map",
    "load_map_file",
    "assign_virtual_ids",
    "resolve",
    "resolve_annotation",
]


@dataclass(frozen=True)
class MapEntry:
    mol_index: int
    bbox: Box | None  # raw detector output may omit boxes; such entries cannot resolve
    identifiers: tuple[str, ...]
    is_virtual: bool = False


@dataclass(frozen=True)
class IdentifierMap:
    entries: tuple[MapEntry, ...]

    def __post_init__(self):
        seen_idx: set[int] = set()
        seen_ids: set[str] = set()
        for e in self.entries:
            if e.mol_index in seen_idx:
                raise ValueError(f"duplicate mol_index {e.mol_index}")
            seen_idx.add(e.mol_index)
            if not e.identifiers:
                raise ValueError(f"molecule {e.mol_index} has no identifier")
            for ident in e.identifiers:
                if not ident:
                    raise ValueError(f"molecule {e.mol_index} has an empty identifier")
                if ident in seen_ids:
                    raise ValueError(f"identifier {ident!r} assigned to more than one molecule")
                seen_ids.add(ident)

    def all_identifiers(self) -> set[str]:
        return {i for e in self.entries for i in e.identifiers}

    def by_identifier(self, ident: str) -> MapEntry | None:
        for e in self.entries:
            if ident in e.identifiers:
                return e
        return None

    def by_index(self, idx: int) -> MapEntry | None:
        for e in self.entries:
            if e.mol_index == idx:
                return e
        return None

    @classmethod
    def from_annotation(cls, ann: DiagramAnnotation) -> "IdentifierMap":
        """Derive a map from ground truth, synthesizing ids for unlabeled molecules."""
        labeled = [
            MapEntry(m.mol_index, m.bbox, m.identifiers, m.is_virtual)
            for m in ann.molecules
            if m.identifiers
        ]
        unlabeled = {m.mol_index: m.bbox for m in ann.molecules if not m.identifiers}
        return assign_virtual_ids(cls(tuple(labeled)), unlabeled)


def _coerce_index(v, where: str) -> int:
    if isinstance(v, bool):
        raise ValueError(f"{where}: mol_index must be an integer")
    if isinstance(v, int):
        return v
    if isinstance(v, str) and v.strip().isdigit():
        return int(v.strip())
    raise ValueError(f"{where}: invalid mol_index {v!r}")


def load_map(document: str | bytes) -> IdentifierMap:
    """Parse one detector-output array: [{mol_index, bbox, identifier, is_virtual}].

    The identifier field may be a string or list of strings ("identifiers"
    is accepted as an alias). Identifier collisions across molecules and
    empty identifier lists are rejected.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    obj = json.loads(document) if isinstance(document, str) else document
    return _entries_from_json(obj)


def _entries_from_json(obj) -> IdentifierMap:
    if not isinstance(obj, list):
        raise ValueError("identifier map must be an array of molecule entries")
    entries = []
    for i, raw in enumerate(obj):
        where = f"entries[{i}]"
        if not isinstance(raw, dict):
            raise ValueError(f"{where}: must be an object")
        idx = _coerce_index(raw.get("mol_index"), where)
        idents = raw.get("identifier", raw.get("identifiers", []))
        if isinstance(idents, str):
            idents = [idents]
        if not isinstance(idents, list) or not all(isinstance(s, str) for s in idents):
            raise ValueError(f"{where}: identifier must be a string or list of strings")
        bbox_raw = raw.get("bbox")
        bbox = Box.from_seq(bbox_raw) if bbox_raw is not None else None
        entries.append(MapEntry(idx, bbox, tuple(idents), bool(raw.get("is_virtual", False))))
    return IdentifierMap(tuple(entries))


def load_map_file(lines: Iterable[str]) -> dict[str, IdentifierMap]:
    """Load a lines file of {image_id, entries: [...]} records keyed by image."""
    out: dict[str, IdentifierMap] = {}
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if not isinstance(obj, dict) or "image_id" not in obj:
            raise ValueError(f"map line {n}: needs an image_id")
        image_id = str(obj["image_id"])
        if image_id in out:
            raise ValueError(f"map line {n}: duplicate image_id {image_id!r}")
        out[image_id] = _entries_from_json(obj.get("entries", []))
    return out


def _all_numeric(idents: set[str]) -> bool:
    return all(s.isdigit() for s in idents)


def assign_virtual_ids(existing: IdentifierMap, unlabeled: dict[int, Box]) -> IdentifierMap:
    """Give every unlabeled molecule a fresh identifier in the map's style.

    Purely numeric maps continue max+1 ascending; mixed or alphanumeric maps
    fall back to "v1", "v2", ... skipping anything already taken. Idempotent
    on a fully labeled map. New entries are flagged is_virtual.
    """
    for idx in unlabeled:
        if existing.by_index(idx) is not None:
            raise ValueError(f"mol_index {idx} is already labeled")
    if not unlabeled:
        return existing
    taken = existing.all_identifiers()
    numeric_style = _all_numeric(taken) if taken else True
    new_entries = list(existing.entries)
    counter = max((int(s) for s in taken), default=0) + 1 if numeric_style else 1
    for idx in sorted(unlabeled):
        while True:
            candidate = str(counter) if numeric_style else f"v{counter}"
            counter += 1
            if candidate not in taken:
                break
        taken.add(candidate)
        new_entries.append(MapEntry(idx, unlabeled[idx], (candidate,), is_virtual=True))
    return IdentifierMap(tuple(new_entries))


@dataclass(frozen=True)
class ResolvedPrediction:
    """Reactions in box space plus the handles that failed to resolve.

    A reaction with any unresolved handle keeps its components untouched and
    is listed in unresolved; matching treats it as unmatchable.
    """

    reactions: tuple[Reaction, ...]
    unresolved: tuple[tuple[int, str], ...]  # (reaction index, handle)

    def unresolved_for(self, reaction_index: int) -> list[str]:
        return [h for i, h in self.unresolved if i == reaction_index]


def _resolve_component(c: Component, mapping: IdentifierMap) -> Component | None:
    if not c.is_molecule or c.box is not None:
        return c
    if c.identifier is not None:
        entry = mapping.by_identifier(c.identifier)
    else:
        entry = mapping.by_index(c.box_index)
    if entry is None or entry.bbox is None:
        return None
    return Component.molecule_box(entry.bbox)


def resolve(pred: ParsedPrediction, mapping: IdentifierMap) -> ResolvedPrediction:
    """Replace identifier/box-index handles by their boxes.

    Unresolved handles are reported, never raised; the reward totality rule
    consumes them as unmatched reactions.
    """
    resolved: list[Reaction] = []
    unresolved: list[tuple[int, str]] = []
    for i, rx in enumerate(pred.reactions):
        roles = {}
        ok = True
        for role in ("reactants", "conditions", "products"):
            comps = []
            for c in rx.role(role):
                rc = _resolve_component(c, mapping)
                if rc is None:
                    handle = c.identifier if c.identifier is not None else f"#{c.box_index}"
                    unresolved.append((i, handle))
                    ok = False
                    comps.append(c)
                else:
                    comps.append(rc)
            roles[role] = tuple(comps)
        resolved.append(rx if not ok else Reaction(**roles))
    return ResolvedPrediction(tuple(resolved), tuple(unresolved))


def resolve_annotation(ann: DiagramAnnotation) -> tuple[Reaction, ...]:
    """Ground-truth reactions with every molecule reference replaced by its box."""
    out = []
    for rx in ann.reactions:
        roles = {}
        for role in ("reactants", "conditions", "products"):
            comps = []
            for c in rx.role(role):
                if c.is_molecule and c.box is None:
                    if c.box_index is not None:
                        entry = ann.molecule_by_index(c.box_index)
                    else:
                        entry = next((m for m in ann.molecules if c.identifier in m.identifiers), None)
                    comps.append(Component.molecule_box(entry.bbox))
                else:
                    comps.append(c)
            roles[role] = tuple(comps)
        out.append(Reaction(**roles))
    return tuple(out)
