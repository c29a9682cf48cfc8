import random

import numpy as np
import pytest

from rxnkit.model import Box
from rxnkit.render import (
    FontSpec,
    Placement,
    PlacementImpossible,
    RenderConfig,
    infer_label_style,
    ink_integral,
    place_identifier,
    render_all,
    spiral_fallback,
    text_mask,
)
from rxnkit.render import _priority_slots  # slot geometry, used by the scan oracle


def blank(h=200, w=200):
    return np.full((h, w), 255, dtype=np.uint8)


def label_box(h):
    return Box(0, 0, 10, h)


class TestInferLabelStyle:
    def test_median_of_labels(self):
        spec = infer_label_style([label_box(14), label_box(16), label_box(18)])
        assert spec.glyph_height == 16

    def test_default_from_molecule_height(self):
        spec = infer_label_style([], [Box(0, 0, 50, 100)])
        assert spec.glyph_height == 12

    def test_single_label(self):
        assert infer_label_style([label_box(40)]).glyph_height == 40

    def test_clamped_to_minimum(self):
        spec = infer_label_style([], [Box(0, 0, 50, 20)])
        assert spec.glyph_height == 8

    def test_clamped_to_48(self):
        spec = infer_label_style([], [Box(0, 0, 50, 500)])
        assert spec.glyph_height == 48


class TestTextMask:
    def test_height_matches_glyph_height(self):
        for h in (8, 10, 13, 21):
            assert text_mask("2a", h, bold=False).shape[0] == h

    def test_bold_widens_by_one(self):
        normal = text_mask("5", 10, bold=False)
        bold = text_mask("5", 10, bold=True)
        assert bold.shape[1] == normal.shape[1] + 1
        assert bold.sum() >= normal.sum()

    def test_unknown_char_renders_block(self):
        m = text_mask("é", 8, bold=False)
        assert m.any()


def _pixel_ink_fraction(image, box: Box) -> float:
    from rxnkit.render import background_level, to_grayscale

    gray = to_grayscale(image)
    bg = background_level(gray)
    region = gray[int(box.y1) : int(box.y2), int(box.x1) : int(box.x2)]
    return float((region < bg).sum()) / region.size


def _overlaps(a: Box, b: Box) -> bool:
    return min(a.x2, b.x2) > max(a.x1, b.x1) and min(a.y2, b.y2) > max(a.y1, b.y1)


class TestPlaceIdentifier:
    def test_blank_canvas_uses_below_center(self):
        img = blank()
        target = Box(80, 80, 120, 120)
        spec = FontSpec(glyph_height=10)
        p = place_identifier(img, target, "7", spec, molecule_boxes=[target])
        assert p.method == "priority_slot"
        assert p.anchor.y1 == target.y2 + spec.glyph_height  # below, one glyph of padding
        cx = (target.x1 + target.x2) / 2
        assert abs((p.anchor.x1 + p.anchor.x2) / 2 - cx) <= 1

    def test_ink_forces_right_middle_with_slot_scan_oracle(self):
        img = blank()
        target = Box(80, 80, 120, 120)
        spec = FontSpec(glyph_height=10)
        img[121:145, :] = 0  # band below
        img[55:80, :] = 0  # band above
        p = place_identifier(img, target, "7", spec, molecule_boxes=[target])
        assert p.method == "priority_slot"
        assert p.anchor.x1 == target.x2 + spec.glyph_height  # right-middle slot
        # oracle: exhaustively scan the slot list with direct pixel counting
        mask = text_mask("7", spec.glyph_height, bold=True)
        h, w = mask.shape
        first_pass = None
        for x1, y1 in _priority_slots(target, w, h, spec.glyph_height):
            rect = Box(x1, y1, x1 + w, y1 + h)
            if rect.x1 < 0 or rect.y1 < 0 or rect.x2 > 200 or rect.y2 > 200:
                continue
            if _overlaps(rect, target):
                continue
            if _pixel_ink_fraction(img, rect) > 0.01:
                continue
            first_pass = rect
            break
        assert p.anchor == first_pass

    def test_occupied_rects_block_slots(self):
        img = blank()
        target = Box(80, 80, 120, 120)
        spec = FontSpec(glyph_height=10)
        first = place_identifier(img, target, "1", spec, molecule_boxes=[target])
        second = place_identifier(img, target, "2", spec, occupied=[first.anchor], molecule_boxes=[target])
        assert not _overlaps(first.anchor, second.anchor)
        assert second.anchor != first.anchor

    def test_returned_fraction_matches_pixel_count(self):
        rng = random.Random(8)
        img = blank()
        for _ in range(60):  # random speckle
            y, x = rng.randrange(200), rng.randrange(200)
            img[y, x] = 0
        target = Box(80, 80, 120, 120)
        p = place_identifier(img, target, "3a", FontSpec(glyph_height=10), molecule_boxes=[target])
        assert p.ink_fraction_under == pytest.approx(_pixel_ink_fraction(img, p.anchor))
        assert p.ink_fraction_under <= 0.01


class TestSpiralFallback:
    def test_clear_channel_found(self):
        img = np.zeros((200, 200), dtype=np.uint8)  # saturated with ink
        img[134:146, :] = 255  # one clear channel below the molecule
        target = Box(95, 95, 105, 105)
        spec = FontSpec(glyph_height=10)
        p = place_identifier(img, target, "7", spec, molecule_boxes=[target])
        assert p.method == "spiral_fallback"
        assert 134 <= p.anchor.y1 and p.anchor.y2 <= 146
        assert p.ink_fraction_under == 0.0

    def test_narrow_channel_needs_reduced_font(self):
        img = np.zeros((200, 200), dtype=np.uint8)
        img[136:144, :] = 255  # 8 px channel, below the 12 px nominal font
        target = Box(95, 95, 105, 105)
        p = place_identifier(img, target, "7", FontSpec(glyph_height=12), molecule_boxes=[target])
        assert p.method == "spiral_fallback"
        assert p.anchor.height < 12

    def test_saturated_image_impossible(self):
        img = np.zeros((120, 120), dtype=np.uint8)
        target = Box(55, 55, 65, 65)
        with pytest.raises(PlacementImpossible):
            place_identifier(img, target, "7", FontSpec(glyph_height=10), molecule_boxes=[target])

    def test_deterministic(self):
        img = np.zeros((200, 200), dtype=np.uint8)
        img[134:146, :] = 255
        target = Box(95, 95, 105, 105)
        spec = FontSpec(glyph_height=10)
        a = spiral_fallback(img, target, "7", spec, molecule_boxes=[target])
        b = spiral_fallback(img, target, "7", spec, molecule_boxes=[target])
        assert a == b


def _random_fixture(rng, n_mols=3, blobs=6, size=240):
    img = np.full((size, size), 255, dtype=np.uint8)
    boxes = {}
    for i in range(n_mols):
        x = 20 + (i % 3) * 75
        y = 20 + (i // 3) * 75
        boxes[i] = Box(x, y, x + 40, y + 40)
        img[y : y + 40, x : x + 40] = 30  # the molecule's own ink
    for _ in range(blobs):
        x, y = rng.randrange(size - 12), rng.randrange(size - 12)
        img[y : y + 10, x : x + 10] = 0
    return img, boxes


class TestRenderAll:
    def test_three_molecules_blank_margins(self):
        img = blank(240, 240)
        boxes = {0: Box(20, 20, 60, 60), 1: Box(100, 20, 140, 60), 2: Box(180, 100, 220, 140)}
        out, placements, errors = render_all(img, boxes, [(0, "1"), (1, "2"), (2, "3")])
        assert len(placements) == 3 and not errors
        for i, a in enumerate(placements):
            for b in placements[i + 1 :]:
                assert not _overlaps(a.anchor, b.anchor)

    def test_determinism(self):
        rng = random.Random(77)
        img, boxes = _random_fixture(rng)
        out1, p1, _ = render_all(img, boxes, [(0, "1"), (1, "2a")])
        out2, p2, _ = render_all(img, boxes, [(0, "1"), (1, "2a")])
        assert np.array_equal(out1, out2)
        assert p1 == p2

    def test_no_occlusion_invariant_random_fixtures(self):
        rng = random.Random(123)
        cfg = RenderConfig()
        for trial in range(10):
            img, boxes = _random_fixture(rng, blobs=rng.randrange(0, 12))
            to_draw = [(i, str(i + 1)) for i in boxes]
            out, placements, errors = render_all(img, boxes, to_draw, cfg)
            rects = [p.anchor for p in placements]
            for p in placements:
                assert _pixel_ink_fraction(img, p.anchor) <= cfg.ink_threshold
                assert p.anchor.x1 >= 0 and p.anchor.y1 >= 0
                assert p.anchor.x2 <= img.shape[1] and p.anchor.y2 <= img.shape[0]
                for b in boxes.values():
                    assert not _overlaps(p.anchor, b)
            for i, a in enumerate(rects):
                for b in rects[i + 1 :]:
                    assert not _overlaps(a, b)

    def test_partial_failure_reports_error_entries(self):
        # molecule 1 sits deep inside ink; its spiral radius cannot escape
        img = np.zeros((400, 400), dtype=np.uint8)
        img[:, 300:] = 255
        boxes = {0: Box(310, 40, 350, 80), 1: Box(40, 180, 80, 220), 2: Box(310, 300, 350, 340)}
        out, placements, errors = render_all(img, boxes, [(0, "1"), (1, "2"), (2, "3")])
        assert len(placements) == 2
        assert errors == [{"mol_index": 1, "text": "2", "error": "placement_impossible"}]

    def test_unknown_mol_index_reported(self):
        img = blank()
        out, placements, errors = render_all(img, {0: Box(10, 10, 50, 50)}, [(9, "x")])
        assert errors[0]["error"] == "unknown mol_index"

    def test_stamped_glyph_height_matches_spec(self):
        img = blank(240, 240)
        boxes = {0: Box(100, 100, 140, 140)}
        font = FontSpec(glyph_height=14)
        out, placements, _ = render_all(img, boxes, [(0, "8")], font=font)
        assert abs(placements[0].anchor.height - 14) <= 1
        # some ink actually landed inside the anchor
        a = placements[0].anchor
        assert (out[int(a.y1) : int(a.y2), int(a.x1) : int(a.x2)] == 0).any()

    def test_rgb_input_preserved(self):
        img = np.full((120, 120, 3), 255, dtype=np.uint8)
        boxes = {0: Box(40, 40, 70, 70)}
        img[40:70, 40:70] = (20, 20, 20)
        out, placements, errors = render_all(img, boxes, [(0, "1")])
        assert out.shape == img.shape
        assert len(placements) == 1

    def test_original_image_not_mutated(self):
        img = blank()
        ref = img.copy()
        render_all(img, {0: Box(80, 80, 120, 120)}, [(0, "1")])
        assert np.array_equal(img, ref)
