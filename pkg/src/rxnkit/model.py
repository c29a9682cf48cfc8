"""Data model for reaction-diagram parses.

A diagram parse is a set of reactions; each reaction is a (reactants,
conditions, products) triple whose members are either molecule references
(a pixel box, a drawn box index, or a printed identifier string) or free
text. Ground-truth annotations are parsed strictly; model predictions are
parsed totally (failure is a value, never an exception), because the reward
path has to stay alive on arbitrary rollout output.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

__all__ = [
    "Box",
    "Component",
    "Reaction",
    "MoleculeEntry",
    "DiagramAnnotation",
    "ParsedPrediction",
    "ParseFailure",
    "PredictionRecord",
    "AnnotationError",
    "FORMATS",
    "DIAGRAM_TYPES",
    "normalize_text",
    "parse_ground_truth",
    "serialize_annotation",
    "load_annotations",
    "parse_prediction",
    "canonical_serialize",
    "load_prediction_records",
]

FORMATS = ("bros", "bivp", "idtvp")
DIAGRAM_TYPES = ("single", "multi_line", "tree", "cyclic")

_WS_RUN = re.compile(r"\s+")


def normalize_text(s: str) -> str:
    """Unicode NFC plus whitespace collapse; the text-equality normal form."""
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", s)).strip()


class AnnotationError(ValueError):
    """Raised for invalid ground-truth records; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


@dataclass(frozen=True, order=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {self.as_list()}: requires x1 < x2 and y1 < y2")
        if min(self.x1, self.y1) < 0:
            raise ValueError(f"box {self.as_list()} has negative coordinates")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @classmethod
    def from_seq(cls, seq) -> "Box":
        vals = list(seq)
        if len(vals) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ValueError(f"box must be 4 numbers, got {seq!r}")
        return cls(*(float(v) for v in vals))


@dataclass(frozen=True)
class Component:
    """One member of a reaction role: a molecule reference or a text string.

    Exactly one payload is populated. Molecule payloads are a resolved pixel
    box, a drawn box index, or a printed identifier; which one is legal
    depends on the output format.
    """

    kind: str  # "molecule" | "text"
    box: Box | None = None
    box_index: int | None = None
    identifier: str | None = None
    text: str | None = None

    def __post_init__(self):
        if self.kind == "molecule":
            payloads = [p for p in (self.box, self.box_index, self.identifier) if p is not None]
            if len(payloads) != 1 or self.text is not None:
                raise ValueError("molecule component needs exactly one of box/box_index/identifier")
            if self.identifier is not None and not self.identifier:
                raise ValueError("identifier must be non-empty")
        elif self.kind == "text":
            if self.text is None or any(p is not None for p in (self.box, self.box_index, self.identifier)):
                raise ValueError("text component carries only a text payload")
        else:
            raise ValueError(f"unknown component kind {self.kind!r}")

    @classmethod
    def molecule_box(cls, box: Box) -> "Component":
        return cls(kind="molecule", box=box)

    @classmethod
    def molecule_index(cls, idx: int) -> "Component":
        return cls(kind="molecule", box_index=int(idx))

    @classmethod
    def molecule_id(cls, ident: str) -> "Component":
        return cls(kind="molecule", identifier=ident)

    @classmethod
    def of_text(cls, value: str) -> "Component":
        return cls(kind="text", text=value)

    @property
    def is_molecule(self) -> bool:
        return self.kind == "molecule"

    def key(self):
        """Equality key used for set semantics within a role.

        Molecules compare by resolved payload; text compares after NFC and
        whitespace collapse.
        """
        if self.kind == "text":
            return ("t", normalize_text(self.text))
        if self.box is not None:
            return ("m", "box", self.box.x1, self.box.y1, self.box.x2, self.box.y2)
        if self.box_index is not None:
            return ("m", "idx", self.box_index)
        return ("m", "id", self.identifier)

    def to_json(self) -> dict:
        if self.kind == "text":
            return {"type": "text", "value": self.text}
        if self.box is not None:
            return {"type": "molecule", "ref": self.box.as_list()}
        ref = self.box_index if self.box_index is not None else self.identifier
        return {"type": "molecule", "ref": ref}


ROLES = ("reactants", "conditions", "products")


@dataclass(frozen=True)
class Reaction:
    reactants: tuple[Component, ...]
    conditions: tuple[Component, ...]
    products: tuple[Component, ...]

    def role(self, name: str) -> tuple[Component, ...]:
        return getattr(self, name)

    def molecules(self, role: str) -> list[Component]:
        return [c for c in self.role(role) if c.is_molecule]

    def texts(self, role: str) -> list[Component]:
        return [c for c in self.role(role) if not c.is_molecule]

    def to_json(self) -> dict:
        return {r: [c.to_json() for c in self.role(r)] for r in ROLES}


@dataclass(frozen=True)
class MoleculeEntry:
    mol_index: int
    bbox: Box
    identifiers: tuple[str, ...] = ()
    is_virtual: bool = False


@dataclass(frozen=True)
class DiagramAnnotation:
    image_id: str
    width: float
    height: float
    molecules: tuple[MoleculeEntry, ...]
    reactions: tuple[Reaction, ...]
    diagram_type: str | None = None

    def molecule_by_index(self, idx: int) -> MoleculeEntry | None:
        for m in self.molecules:
            if m.mol_index == idx:
                return m
        return None


@dataclass(frozen=True)
class ParseFailure:
    """Why a raw prediction could not become reactions. A value, not an error."""

    kind: str  # "syntax" | "schema" | "empty"
    message: str = ""


@dataclass(frozen=True)
class ParsedPrediction:
    format: str
    reactions: tuple[Reaction, ...]
    raw_valid: bool = True
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    format: str
    raw: str


# ---------------------------------------------------------------------------
# Ground-truth parsing (strict)
# ---------------------------------------------------------------------------


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise AnnotationError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _parse_gt_component(raw, path: str, ann_molecules: list[MoleculeEntry]) -> Component:
    if not isinstance(raw, dict) or "type" not in raw:
        raise AnnotationError(path, f"component must be an object with a type, got {raw!r}")
    ctype = raw["type"]
    if ctype == "text":
        value = _require(raw, "value", path)
        if not isinstance(value, str):
            raise AnnotationError(f"{path}.value", "text value must be a string")
        return Component.of_text(value)
    if ctype != "molecule":
        raise AnnotationError(f"{path}.type", f"unknown component type {ctype!r}")
    ref = _require(raw, "ref", path)
    if isinstance(ref, bool):
        raise AnnotationError(f"{path}.ref", f"invalid molecule ref {ref!r}")
    if isinstance(ref, int):
        if all(m.mol_index != ref for m in ann_molecules):
            raise AnnotationError(f"{path}.ref", f"dangling molecule reference: mol_index {ref}")
        return Component.molecule_index(ref)
    if isinstance(ref, str):
        if not ref:
            raise AnnotationError(f"{path}.ref", "identifier must be non-empty")
        if all(ref not in m.identifiers for m in ann_molecules):
            raise AnnotationError(f"{path}.ref", f"dangling molecule reference: identifier {ref!r}")
        return Component.molecule_id(ref)
    if isinstance(ref, list):
        try:
            box = Box.from_seq(ref)
        except ValueError as e:
            raise AnnotationError(f"{path}.ref", str(e)) from None
        if all(m.bbox != box for m in ann_molecules):
            raise AnnotationError(f"{path}.ref", f"dangling molecule reference: box {ref}")
        return Component.molecule_box(box)
    raise AnnotationError(f"{path}.ref", f"invalid molecule ref {ref!r}")


def _parse_role(raw_reaction: dict, role: str, path: str, molecules) -> tuple[Component, ...]:
    raw_role = raw_reaction.get(role, [])
    if not isinstance(raw_role, list):
        raise AnnotationError(f"{path}.{role}", "role must be an array")
    comps = []
    seen = set()
    for i, raw in enumerate(raw_role):
        comp = _parse_gt_component(raw, f"{path}.{role}[{i}]", molecules)
        if comp.key() in seen:
            raise AnnotationError(f"{path}.{role}[{i}]", "duplicate component within role")
        seen.add(comp.key())
        comps.append(comp)
    return tuple(comps)


def parse_ground_truth(document: Union[str, bytes]) -> DiagramAnnotation:
    """Parse and validate one annotation-lines record.

    Raises AnnotationError with a field path on the first violation:
    malformed syntax, degenerate or out-of-bounds boxes, duplicate
    mol_index, dangling molecule references, or reactions missing a
    molecule reactant/product.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as e:
        raise AnnotationError("<document>", f"malformed syntax: {e}") from None
    if not isinstance(obj, dict):
        raise AnnotationError("<document>", "record must be an object")

    image_id = _require(obj, "image_id", "")
    if not isinstance(image_id, str) or not image_id:
        raise AnnotationError("image_id", "must be a non-empty string")
    width = _require(obj, "width", "")
    height = _require(obj, "height", "")
    for name, v in (("width", width), ("height", height)):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise AnnotationError(name, "must be a positive number")

    diagram_type = obj.get("diagram_type")
    if diagram_type is not None and diagram_type not in DIAGRAM_TYPES:
        raise AnnotationError("diagram_type", f"must be one of {DIAGRAM_TYPES}, got {diagram_type!r}")

    raw_mols = _require(obj, "molecules", "")
    if not isinstance(raw_mols, list):
        raise AnnotationError("molecules", "must be an array")
    molecules: list[MoleculeEntry] = []
    seen_idx: set[int] = set()
    for i, raw in enumerate(raw_mols):
        path = f"molecules[{i}]"
        if not isinstance(raw, dict):
            raise AnnotationError(path, "must be an object")
        mol_index = _require(raw, "mol_index", path)
        if isinstance(mol_index, str) and mol_index.isdigit():
            mol_index = int(mol_index)
        if not isinstance(mol_index, int) or isinstance(mol_index, bool):
            raise AnnotationError(f"{path}.mol_index", "must be an integer")
        if mol_index in seen_idx:
            raise AnnotationError(f"{path}.mol_index", f"duplicate mol_index {mol_index}")
        seen_idx.add(mol_index)
        try:
            bbox = Box.from_seq(_require(raw, "bbox", path))
        except ValueError as e:
            raise AnnotationError(f"{path}.bbox", str(e)) from None
        if bbox.x2 > width or bbox.y2 > height:
            raise AnnotationError(f"{path}.bbox", f"box {bbox.as_list()} outside image {width}x{height}")
        idents = raw.get("identifiers", raw.get("identifier", []))
        if isinstance(idents, str):
            idents = [idents]
        if not isinstance(idents, list) or not all(isinstance(s, str) and s for s in idents):
            raise AnnotationError(f"{path}.identifiers", "must be a list of non-empty strings")
        molecules.append(
            MoleculeEntry(mol_index, bbox, tuple(idents), bool(raw.get("is_virtual", False)))
        )

    raw_reactions = _require(obj, "reactions", "")
    if not isinstance(raw_reactions, list):
        raise AnnotationError("reactions", "must be an array")
    reactions = []
    for i, raw in enumerate(raw_reactions):
        path = f"reactions[{i}]"
        if not isinstance(raw, dict):
            raise AnnotationError(path, "must be an object")
        roles = {r: _parse_role(raw, r, path, molecules) for r in ROLES}
        rx = Reaction(**roles)
        for role in ("reactants", "products"):
            if not rx.molecules(role):
                raise AnnotationError(f"{path}.{role}", "needs at least one molecule component")
        reactions.append(rx)

    return DiagramAnnotation(
        image_id=image_id,
        width=float(width),
        height=float(height),
        molecules=tuple(molecules),
        reactions=tuple(reactions),
        diagram_type=diagram_type,
    )


def serialize_annotation(ann: DiagramAnnotation) -> str:
    """One-line JSON form accepted back by parse_ground_truth."""
    obj = {
        "image_id": ann.image_id,
        "width": ann.width,
        "height": ann.height,
        "molecules": [
            {
                "mol_index": m.mol_index,
                "bbox": m.bbox.as_list(),
                "identifiers": list(m.identifiers),
                "is_virtual": m.is_virtual,
            }
            for m in ann.molecules
        ],
        "reactions": [r.to_json() for r in ann.reactions],
    }
    if ann.diagram_type is not None:
        obj["diagram_type"] = ann.diagram_type
    return json.dumps(obj, ensure_ascii=False)


def load_annotations(lines: Iterable[str]) -> dict[str, DiagramAnnotation]:
    """Parse an annotation-lines stream; rejects duplicate image ids."""
    out: dict[str, DiagramAnnotation] = {}
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            ann = parse_ground_truth(line)
        except AnnotationError as e:
            raise AnnotationError(f"line {n}.{e.path}", e.reason) from None
        if ann.image_id in out:
            raise AnnotationError(f"line {n}.image_id", f"duplicate image_id {ann.image_id!r}")
        out[ann.image_id] = ann
    return out


def load_prediction_records(lines: Iterable[str], default_format: str = "idtvp") -> Iterator[PredictionRecord]:
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"prediction line {n}: malformed syntax: {e}") from None
        if not isinstance(obj, dict) or not {"image_id", "raw"} <= set(obj):
            raise ValueError(f"prediction line {n}: needs image_id and raw fields")
        fmt = obj.get("format", default_format)
        if fmt not in FORMATS:
            raise ValueError(f"prediction line {n}: unknown format {fmt!r}")
        raw = obj["raw"]
        if not isinstance(raw, str):
            raw = json.dumps(raw, ensure_ascii=False)
        yield PredictionRecord(image_id=str(obj["image_id"]), format=fmt, raw=raw)


# ---------------------------------------------------------------------------
# Prediction parsing (total)
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


class _Schema(Exception):
    pass


def _pred_component(raw, fmt: str, role: str):
    """Interpret one raw component.

    Explicit {"type": ...} objects are accepted in every format. Bare values
    follow the format: idtvp treats strings in reactants/products as molecule
    identifiers and strings in conditions as text; bivp treats integers as
    box indices; bros treats 4-number arrays as boxes. Other bare strings
    are text.
    """
    if isinstance(raw, dict):
        ctype = raw.get("type")
        if ctype == "text":
            value = raw.get("value")
            if not isinstance(value, str):
                raise _Schema(f"text component needs a string value, got {value!r}")
            return Component.of_text(value)
        if ctype != "molecule":
            raise _Schema(f"unknown component type {ctype!r}")
        ref = raw.get("ref")
        if fmt == "idtvp":
            if not isinstance(ref, str) or not ref:
                raise _Schema(f"idtvp molecule ref must be an identifier string, got {ref!r}")
            return Component.molecule_id(ref)
        if fmt == "bivp":
            if isinstance(ref, bool) or not isinstance(ref, int):
                raise _Schema(f"bivp molecule ref must be a box index, got {ref!r}")
            return Component.molecule_index(ref)
        try:
            return Component.molecule_box(Box.from_seq(ref))
        except (TypeError, ValueError) as e:
            raise _Schema(f"bros molecule ref must be a valid box: {e}") from None
    if isinstance(raw, str):
        if fmt == "idtvp" and role in ("reactants", "products"):
            if not raw:
                raise _Schema("identifier must be non-empty")
            return Component.molecule_id(raw)
        return Component.of_text(raw)
    if isinstance(raw, bool):
        raise _Schema(f"invalid component {raw!r}")
    if isinstance(raw, int):
        if fmt != "bivp":
            raise _Schema(f"bare integer component only valid in bivp, got {raw!r}")
        return Component.molecule_index(raw)
    if isinstance(raw, list):
        if fmt != "bros":
            raise _Schema(f"bare box component only valid in bros, got {raw!r}")
        try:
            return Component.molecule_box(Box.from_seq(raw))
        except ValueError as e:
            raise _Schema(str(e)) from None
    raise _Schema(f"invalid component {raw!r}")


def parse_prediction(raw: Union[str, bytes], fmt: str) -> ParsedPrediction | ParseFailure:
    """Parse raw model output into reactions, or classify the failure.

    Never raises on any byte string. Failure classes: "empty" (blank
    output), "syntax" (undecodable), "schema" (decodes but violates the
    reaction schema). An empty reaction list is a valid parse; the reward
    layer decides what it is worth.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    if not isinstance(raw, str):
        return ParseFailure("syntax", f"raw output must be text, got {type(raw).__name__}")
    text = raw.strip()
    if not text:
        return ParseFailure("empty", "blank output")
    m = _FENCE.search(text)
    if m:
        text = m.group(1).strip()
        if not text:
            return ParseFailure("empty", "empty code fence")
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, RecursionError) as e:
        return ParseFailure("syntax", f"invalid JSON: {e}")

    if isinstance(obj, dict) and "reactions" in obj:
        obj = obj["reactions"]
    if not isinstance(obj, list):
        return ParseFailure("schema", f"expected a reaction array, got {type(obj).__name__}")

    reactions = []
    warnings: list[str] = []
    for i, raw_rx in enumerate(obj):
        if not isinstance(raw_rx, dict):
            return ParseFailure("schema", f"reactions[{i}] must be an object")
        roles = {}
        try:
            for role in ROLES:
                raw_role = raw_rx.get(role, [])
                if not isinstance(raw_role, list):
                    raise _Schema(f"reactions[{i}].{role} must be an array")
                comps, seen = [], set()
                for j, c in enumerate(raw_role):
                    comp = _pred_component(c, fmt, role)
                    if comp.key() in seen:
                        warnings.append(f"reactions[{i}].{role}[{j}]: duplicate component dropped")
                        continue
                    seen.add(comp.key())
                    comps.append(comp)
                roles[role] = tuple(comps)
        except _Schema as e:
            return ParseFailure("schema", f"reactions[{i}]: {e}")
        rx = Reaction(**roles)
        for role in ("reactants", "products"):
            if not rx.molecules(role):
                return ParseFailure("schema", f"reactions[{i}].{role} needs at least one molecule")
        reactions.append(rx)

    return ParsedPrediction(format=fmt, reactions=tuple(reactions), raw_valid=True, warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def _canonical_component(c: Component) -> dict:
    if c.kind == "text":
        return {"type": "text", "value": normalize_text(c.text)}
    if c.box is not None:
        return {"type": "molecule", "ref": [float(v) for v in c.box.as_list()]}
    ref = c.box_index if c.box_index is not None else c.identifier
    return {"type": "molecule", "ref": ref}


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def canonical_serialize(p: ParsedPrediction) -> str:
    """Deterministic serialization: set-equal predictions give identical bytes.

    Components sort by their serialized form within each role; reactions sort
    by (min reactant key, min product key) with the full serialized reaction
    as the tiebreak.
    """
    if not p.raw_valid:
        raise ValueError("cannot canonicalize an invalid prediction")
    rendered = []
    for rx in p.reactions:
        roles = {}
        for role in ROLES:
            atoms = sorted((_canonical_component(c) for c in rx.role(role)), key=_dump)
            roles[role] = atoms
        body = _dump(roles)
        min_reactant = min((_dump(a) for a in roles["reactants"]), default="")
        min_product = min((_dump(a) for a in roles["products"]), default="")
        rendered.append(((min_reactant, min_product, body), roles))
    rendered.sort(key=lambda item: item[0])
    return _dump({"format": p.format, "reactions": [roles for _, roles in rendered]})
