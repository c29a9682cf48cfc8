"""Shared generators for randomized fixtures.

Molecules are laid out on a disjoint grid so IoU between different
molecules is 0 and between a molecule and itself is 1; randomized matching
tests then have crisp expected outcomes.
"""

import json
import random

import pytest

from rxnkit.model import DiagramAnnotation, parse_ground_truth

CONDITION_TEXTS = ["NaOH", "Pd/C, H2", "reflux", "EtOH", "DMF, 80 C", "hv", "AcOH", "r.t."]
DIAGRAM_TYPES = ["single", "multi_line", "tree", "cyclic"]


def grid_box(slot: int, cols: int = 8, cell: int = 60, size: int = 40) -> list[float]:
    row, col = divmod(slot, cols)
    x1 = col * cell + 5
    y1 = row * cell + 5
    return [float(x1), float(y1), float(x1 + size), float(y1 + size)]


def make_annotation_dict(
    rng: random.Random,
    image_id: str = "img",
    n_reactions: int | None = None,
    with_text: bool = True,
    diagram_type: str | None = None,
) -> dict:
    if n_reactions is None:
        n_reactions = rng.randint(1, 3)
    molecules = []
    reactions = []
    slot = 0
    for _ in range(n_reactions):
        n_reactants = rng.randint(1, 2)
        n_products = rng.randint(1, 2)
        n_cond_mols = rng.randint(0, 1)
        rx = {"reactants": [], "conditions": [], "products": []}
        for role, count in (("reactants", n_reactants), ("conditions", n_cond_mols), ("products", n_products)):
            for _ in range(count):
                ident = str(slot + 1)
                molecules.append({"mol_index": slot, "bbox": grid_box(slot), "identifiers": [ident], "is_virtual": False})
                rx[role].append({"type": "molecule", "ref": ident})
                slot += 1
        if with_text and rng.random() < 0.8:
            rx["conditions"].append({"type": "text", "value": rng.choice(CONDITION_TEXTS)})
        reactions.append(rx)
    out = {
        "image_id": image_id,
        "width": 8 * 60.0,
        "height": 60.0 * ((slot // 8) + 1),
        "molecules": molecules,
        "reactions": reactions,
    }
    if diagram_type is not None:
        out["diagram_type"] = diagram_type
    return out


def make_annotation(rng: random.Random, image_id: str = "img", **kw) -> DiagramAnnotation:
    return parse_ground_truth(json.dumps(make_annotation_dict(rng, image_id, **kw)))


def reaction_to_idtvp(rx: dict) -> dict:
    """Raw idtvp reaction object from an annotation reaction dict.

    Bare strings read as molecule handles only in reactants/products, so
    condition molecules use the explicit object form.
    """
    out = {}
    for role in ("reactants", "conditions", "products"):
        comps = []
        for c in rx[role]:
            if c["type"] != "molecule":
                comps.append({"type": "text", "value": c["value"]})
            elif role == "conditions":
                comps.append({"type": "molecule", "ref": c["ref"]})
            else:
                comps.append(c["ref"])
        out[role] = comps
    return out


def perfect_raw(ann_dict: dict, rng: random.Random | None = None) -> str:
    """idtvp output set-equal to the annotation, optionally shuffled."""
    reactions = [reaction_to_idtvp(rx) for rx in ann_dict["reactions"]]
    if rng is not None:
        rng.shuffle(reactions)
        for rx in reactions:
            for role in rx:
                rng.shuffle(rx[role])
    return json.dumps({"reactions": reactions})


def shuffled_variant(raw: str, rng: random.Random) -> str:
    """Reorder reactions and within-role components of a raw idtvp string."""
    obj = json.loads(raw)
    reactions = obj["reactions"] if isinstance(obj, dict) else obj
    rng.shuffle(reactions)
    for rx in reactions:
        for role in rx:
            if isinstance(rx[role], list):
                rng.shuffle(rx[role])
    return json.dumps({"reactions": reactions})


def degraded_raw(ann_dict: dict, rng: random.Random) -> str:
    """Imperfect idtvp output: drops reactions, perturbs text, swaps handles."""
    reactions = []
    for rx in ann_dict["reactions"]:
        roll = rng.random()
        if roll < 0.2:
            continue  # dropped reaction -> false negative
        out = reaction_to_idtvp(rx)
        if roll < 0.5:
            for role in out:
                for i, c in enumerate(out[role]):
                    if isinstance(c, dict) and c.get("type") == "text" and rng.random() < 0.7:
                        out[role][i] = {"type": "text", "value": c["value"] + " extra tokens appended"}
            if out["reactants"] and rng.random() < 0.5:
                out["reactants"][0] = "999"  # unresolvable handle
        reactions.append(out)
    if rng.random() < 0.15:
        reactions.append({"reactants": ["1"], "conditions": [], "products": ["1"]})  # spurious
    return json.dumps({"reactions": reactions})


@pytest.fixture
def rng():
    return random.Random(20260811)
