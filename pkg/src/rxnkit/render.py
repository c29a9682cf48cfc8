"""Ink-aware identifier stamping on raster reaction diagrams.

Labels are placed next to molecule boxes without covering existing ink:
candidate slots around the box are tried in a fixed priority order, each
verified against image bounds, previously placed rects, molecule boxes and
a pixel-level ink-density check. When every slot fails, an outward square
spiral scan with progressive font shrinking finds the nearest viable
whitespace. Everything is a pure function of its inputs, so stamping the
same image twice yields identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from ._font5x7 import GLYPH_COLS, GLYPH_ROWS, glyph
from .model import Box

__all__ = [
    "FontSpec",
    "Placement",
    "PlacementImpossible",
    "RenderConfig",
    "infer_label_style",
    "place_identifier",
    "spiral_fallback",
    "render_all",
    "text_mask",
]

DEFAULT_MIN_GLYPH = 8


@dataclass(frozen=True)
class FontSpec:
    glyph_height: int
    stroke: str = "bold"  # "normal" | "bold"
    color: int = 0

    def __post_init__(self):
        if self.glyph_height < 1:
            raise ValueError("glyph_height must be positive")
        if self.stroke not in ("normal", "bold"):
            raise ValueError("stroke must be normal or bold")
        if not 0 <= self.color <= 255:
            raise ValueError("color must be a grayscale level 0..255")


@dataclass(frozen=True)
class Placement:
    mol_index: int
    text: str
    anchor: Box
    method: str  # "priority_slot" | "spiral_fallback"
    ink_fraction_under: float

    def to_json(self) -> dict:
        return {
            "mol_index": self.mol_index,
            "text": self.text,
            "anchor": self.anchor.as_list(),
            "method": self.method,
            "ink_fraction_under": self.ink_fraction_under,
        }


class PlacementImpossible(Exception):
    def __init__(self, mol_index: int, text: str):
        super().__init__(f"no viable placement for {text!r} (molecule {mol_index})")
        self.mol_index = mol_index
        self.text = text


@dataclass(frozen=True)
class RenderConfig:
    ink_threshold: float = 0.01
    min_glyph: int = DEFAULT_MIN_GLYPH
    spiral_step: int = 2
    radius_factor: float = 3.0
    font_shrink: float = 0.85


def infer_label_style(
    existing_label_boxes: Sequence[Box],
    molecule_boxes: Sequence[Box] = (),
    minimum: int = DEFAULT_MIN_GLYPH,
) -> FontSpec:
    """Glyph height from the median existing label height; without labels,
    12% of the median molecule height clamped to [8, 48] px."""
    if existing_label_boxes:
        heights = sorted(b.height for b in existing_label_boxes)
        n = len(heights)
        med = heights[n // 2] if n % 2 else (heights[n // 2 - 1] + heights[n // 2]) / 2
        return FontSpec(glyph_height=max(minimum, round(med)))
    if molecule_boxes:
        heights = sorted(b.height for b in molecule_boxes)
        n = len(heights)
        med = heights[n // 2] if n % 2 else (heights[n // 2 - 1] + heights[n // 2]) / 2
        h = min(48, max(8, round(0.12 * med)))
    else:
        h = 12
    return FontSpec(glyph_height=max(minimum, h))


# ---------------------------------------------------------------------------
# Text rasterization
# ---------------------------------------------------------------------------


def _char_cell(h: int) -> tuple[int, int]:
    cw = max(1, round(h * GLYPH_COLS / GLYPH_ROWS))
    gap = max(1, round(h / GLYPH_ROWS))
    return cw, gap


def text_mask(text: str, glyph_height: int, bold: bool = True) -> np.ndarray:
    """Boolean raster of the text at the given glyph height.

    Nearest-neighbour scaling of the 5x7 bitmaps; bold doubles the stroke by
    OR-ing a one-pixel horizontal shift.
    """
    h = int(glyph_height)
    cw, gap = _char_cell(h)
    if not text:
        text = " "
    w = len(text) * cw + (len(text) - 1) * gap
    mask = np.zeros((h, w + (1 if bold else 0)), dtype=bool)
    ys = np.arange(h) * GLYPH_ROWS // h
    xs = np.arange(cw) * GLYPH_COLS // cw
    x0 = 0
    for ch in text:
        cell = glyph(ch)[np.ix_(ys, xs)]
        mask[:, x0 : x0 + cw] |= cell
        x0 += cw + gap
    if bold:
        mask[:, 1:] |= mask[:, :-1].copy()
    return mask


# ---------------------------------------------------------------------------
# Ink accounting
# ---------------------------------------------------------------------------


def to_grayscale(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return image
    if image.ndim == 3:
        return np.round(image[..., :3].astype(np.float64).mean(axis=2)).astype(np.uint8)
    raise ValueError(f"expected a (H,W) or (H,W,C) raster, got shape {image.shape}")


def background_level(gray: np.ndarray) -> int:
    """The image's modal gray level; everything strictly darker is ink.

    Diagrams are dark ink on light paper, so a dark modal level means the
    page is ink-dominant and the paper estimate falls back to white.
    """
    mode = int(np.bincount(gray.reshape(-1), minlength=256).argmax())
    return mode if mode >= 128 else 255


def ink_integral(gray: np.ndarray) -> np.ndarray:
    ink = (gray < background_level(gray)).astype(np.float64)
    out = np.zeros((gray.shape[0] + 1, gray.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(ink, axis=0), axis=1, out=out[1:, 1:])
    return out


def _ink_fraction(integral: np.ndarray, x1: int, y1: int, x2: int, y2: int) -> float:
    total = integral[y2, x2] - integral[y1, x2] - integral[y2, x1] + integral[y1, x1]
    return float(total) / ((x2 - x1) * (y2 - y1))


def _blocked_array(boxes: Sequence[Box]) -> np.ndarray:
    arr = np.zeros((len(boxes), 4), dtype=np.float64)
    for i, b in enumerate(boxes):
        arr[i] = (b.x1, b.y1, b.x2, b.y2)
    return arr


def _rect_ok(x1, y1, w, h, img_h, img_w, blocked, integral, limit):
    x2, y2 = x1 + w, y1 + h
    if x1 < 0 or y1 < 0 or x2 > img_w or y2 > img_h:
        return None
    for k in range(blocked.shape[0]):
        if min(x2, blocked[k, 2]) > max(x1, blocked[k, 0]) and min(y2, blocked[k, 3]) > max(y1, blocked[k, 1]):
            return None
    frac = _ink_fraction(integral, x1, y1, x2, y2)
    if frac > limit:
        return None
    return frac


def _priority_slots(target: Box, w: int, h: int, pad: int):
    cx, cy = (target.x1 + target.x2) / 2.0, (target.y1 + target.y2) / 2.0
    below = target.y2 + pad
    above = target.y1 - pad - h
    right = target.x2 + pad
    left = target.x1 - pad - w
    centered_x = cx - w / 2.0
    centered_y = cy - h / 2.0
    # below, above, right, left, then the four corners
    slots = [
        (centered_x, below),
        (centered_x, above),
        (right, centered_y),
        (left, centered_y),
        (right, below),
        (left, below),
        (right, above),
        (left, above),
    ]
    return [(int(round(x)), int(round(y))) for x, y in slots]


def place_identifier(
    image: np.ndarray,
    target: Box,
    text: str,
    spec: FontSpec,
    occupied: Sequence[Box] = (),
    molecule_boxes: Sequence[Box] = (),
    cfg: RenderConfig | None = None,
    integral: np.ndarray | None = None,
    mol_index: int = -1,
) -> Placement:
    """Find a non-occluding anchor rect for the text next to the target box.

    Priority slots first (below, above, right, left, corners, each padded by
    one glyph height); the spiral fallback runs only when all slots fail.
    Raises PlacementImpossible when the fallback also exhausts.
    """
    cfg = cfg or RenderConfig()
    gray = to_grayscale(image)
    if integral is None:
        integral = ink_integral(gray)
    img_h, img_w = gray.shape
    mask = text_mask(text, spec.glyph_height, spec.stroke == "bold")
    h, w = mask.shape
    blocked = _blocked_array(list(molecule_boxes) + list(occupied))
    for x1, y1 in _priority_slots(target, w, h, spec.glyph_height):
        frac = _rect_ok(x1, y1, w, h, img_h, img_w, blocked, integral, cfg.ink_threshold)
        if frac is not None:
            anchor = Box(float(x1), float(y1), float(x1 + w), float(y1 + h))
            return Placement(mol_index, text, anchor, "priority_slot", frac)
    return spiral_fallback(image, target, text, spec, occupied, molecule_boxes, cfg, integral, mol_index)


def spiral_fallback(
    image: np.ndarray,
    target: Box,
    text: str,
    spec: FontSpec,
    occupied: Sequence[Box] = (),
    molecule_boxes: Sequence[Box] = (),
    cfg: RenderConfig | None = None,
    integral: np.ndarray | None = None,
    mol_index: int = -1,
) -> Placement:
    """Square-spiral scan around the target centroid with font shrinking.

    Scales walk glyph_height * shrink^k down to the configured minimum; for
    each scale the spiral visits offsets in a fixed deterministic order and
    the first rect passing bounds, overlap and ink checks wins.
    """
    cfg = cfg or RenderConfig()
    gray = to_grayscale(image)
    if integral is None:
        integral = ink_integral(gray)
    img_h, img_w = gray.shape
    blocked = _blocked_array(list(molecule_boxes) + list(occupied))
    cx = int(round((target.x1 + target.x2) / 2.0))
    cy = int(round((target.y1 + target.y2) / 2.0))
    max_radius = int(round(cfg.radius_factor * math.hypot(target.width, target.height)))

    # shrink ladder: glyph_height * shrink^k, ending on the minimum itself
    heights: list[int] = []
    scale = 1.0
    while True:
        h = round(spec.glyph_height * scale)
        if h < cfg.min_glyph:
            break
        if not heights or h != heights[-1]:
            heights.append(h)
        scale *= cfg.font_shrink
    floor = min(cfg.min_glyph, spec.glyph_height)
    if not heights or heights[-1] != floor:
        heights.append(floor)

    for h in heights:
        mask = text_mask(text, h, spec.stroke == "bold")
        rect_h, rect_w = mask.shape
        x1, y1, frac = _kernels.spiral_first_fit(
            integral,
            img_h,
            img_w,
            rect_w,
            rect_h,
            cx,
            cy,
            max_radius,
            cfg.spiral_step,
            cfg.ink_threshold,
            blocked,
        )
        if x1 >= 0:
            anchor = Box(float(x1), float(y1), float(x1 + rect_w), float(y1 + rect_h))
            return Placement(mol_index, text, anchor, "spiral_fallback", float(frac))
    raise PlacementImpossible(mol_index, text)


def _stamp(image: np.ndarray, mask: np.ndarray, x1: int, y1: int, color: int) -> np.ndarray:
    h, w = mask.shape
    out = image.copy()
    region = out[y1 : y1 + h, x1 : x1 + w]
    if out.ndim == 3:
        region[mask, :3] = color
    else:
        region[mask] = color
    return out


def render_all(
    image: np.ndarray,
    boxes_by_index: dict[int, Box],
    to_draw: Sequence[tuple[int, str]],
    cfg: RenderConfig | None = None,
    font: FontSpec | None = None,
    existing_labels: Sequence[Box] = (),
) -> tuple[np.ndarray, list[Placement], list[dict]]:
    """Stamp every requested identifier; earlier placements block later ones.

    Returns (stamped image, placements, errors). A placement failure is
    recorded per identifier and does not abort the rest. Ink checks always
    run against the original image.
    """
    cfg = cfg or RenderConfig()
    if font is None:
        font = infer_label_style(existing_labels, list(boxes_by_index.values()), cfg.min_glyph)
    gray = to_grayscale(image)
    integral = ink_integral(gray)
    molecule_boxes = list(boxes_by_index.values())
    occupied: list[Box] = []
    placements: list[Placement] = []
    errors: list[dict] = []
    out = image.copy()
    for mol_index, text in to_draw:
        if mol_index not in boxes_by_index:
            errors.append({"mol_index": mol_index, "text": text, "error": "unknown mol_index"})
            continue
        try:
            p = place_identifier(
                image, boxes_by_index[mol_index], text, font, occupied, molecule_boxes, cfg, integral, mol_index
            )
        except PlacementImpossible:
            errors.append({"mol_index": mol_index, "text": text, "error": "placement_impossible"})
            continue
        glyph_h = int(p.anchor.height)
        mask = text_mask(text, glyph_h, font.stroke == "bold")
        out = _stamp(out, mask, int(p.anchor.x1), int(p.anchor.y1), font.color)
        occupied.append(p.anchor)
        placements.append(p)
    return out, placements, errors
