import json
import random

import pytest

from rxnkit.model import PredictionRecord, load_annotations, parse_ground_truth, parse_prediction
from rxnkit.model import canonical_serialize
from rxnkit.order_analysis import corpus_rates, order_inconsistency, rate_percent
from conftest import make_annotation_dict, perfect_raw, reaction_to_idtvp


def _record(d, reactions=None):
    if reactions is None:
        reactions = [reaction_to_idtvp(rx) for rx in d["reactions"]]
    return PredictionRecord(d["image_id"], "idtvp", json.dumps({"reactions": reactions}))


class TestOrderInconsistency:
    def test_identical_order_perfect_no_misplacement(self, rng):
        d = make_annotation_dict(rng, n_reactions=3)
        check = order_inconsistency(_record(d), parse_ground_truth(json.dumps(d)))
        assert check.perfect and check.misplacements == 0

    def test_swapped_pair_counts_two(self, rng):
        d = make_annotation_dict(rng, n_reactions=2)
        reactions = [reaction_to_idtvp(rx) for rx in d["reactions"]]
        reactions.reverse()
        check = order_inconsistency(_record(d, reactions), parse_ground_truth(json.dumps(d)))
        assert check.perfect and check.misplacements == 2

    def test_wrong_prediction_excluded(self, rng):
        d = make_annotation_dict(rng, n_reactions=2, with_text=False)
        reactions = [reaction_to_idtvp(rx) for rx in d["reactions"]]
        reactions[0]["reactants"] = ["999"]
        check = order_inconsistency(_record(d, reactions), parse_ground_truth(json.dumps(d)))
        assert not check.perfect

    def test_parse_failure_excluded(self, rng):
        d = make_annotation_dict(rng)
        check = order_inconsistency(
            PredictionRecord(d["image_id"], "idtvp", "]][["), parse_ground_truth(json.dumps(d))
        )
        assert not check.perfect

    def test_canonical_order_zero_errors(self, rng):
        """A GT stored in canonical order, predicted via canonical_serialize,
        has no serialization noise at all."""
        for _ in range(20):
            d = make_annotation_dict(rng, n_reactions=3)

            def single_key(rx):
                raw = json.dumps({"reactions": [reaction_to_idtvp(rx)]})
                return canonical_serialize(parse_prediction(raw, "idtvp"))

            keys = [single_key(rx) for rx in d["reactions"]]
            if len(set(keys)) != len(keys):
                continue  # duplicate reactions make the permutation ambiguous
            parsed = parse_prediction(perfect_raw(d), "idtvp")
            canonical = canonical_serialize(parsed)
            canonical_keys = [
                canonical_serialize(
                    parse_prediction(json.dumps({"reactions": [rx]}), "idtvp")
                )
                for rx in json.loads(canonical)["reactions"]
            ]
            order = [keys.index(k) for k in canonical_keys]
            d2 = dict(d)
            d2["reactions"] = [d["reactions"][i] for i in order]
            ann = parse_ground_truth(json.dumps(d2))
            rec = PredictionRecord(d["image_id"], "idtvp", canonical)
            check = order_inconsistency(rec, ann)
            assert check.perfect and check.misplacements == 0
            report = corpus_rates([(rec, ann)])
            assert report.image_errors == 0 and report.reaction_errors == 0

    def test_duplicate_reactions_do_not_inflate_misplacements(self):
        line = {
            "image_id": "dup",
            "width": 480.0,
            "height": 60.0,
            "molecules": [
                {"mol_index": 0, "bbox": [5, 5, 45, 45], "identifiers": ["1"]},
                {"mol_index": 1, "bbox": [65, 5, 105, 45], "identifiers": ["2"]},
            ],
            "reactions": [
                {"reactants": [{"type": "molecule", "ref": "1"}], "conditions": [], "products": [{"type": "molecule", "ref": "2"}]},
                {"reactants": [{"type": "molecule", "ref": "1"}], "conditions": [], "products": [{"type": "molecule", "ref": "2"}]},
            ],
        }
        ann = parse_ground_truth(json.dumps(line))
        rec = PredictionRecord("dup", "idtvp", json.dumps({"reactions": [
            {"reactants": ["1"], "conditions": [], "products": ["2"]},
            {"reactants": ["1"], "conditions": [], "products": ["2"]},
        ]}))
        check = order_inconsistency(rec, ann)
        assert check.perfect and check.misplacements == 0


class TestCorpusRates:
    def _inject(self, rng, n_images, error_images):
        """Perfect corpus; permutations injected into exactly error_images
        multi-reaction samples."""
        pairs = []
        for i in range(n_images):
            d = make_annotation_dict(rng, f"im{i}", n_reactions=3)
            ann = parse_ground_truth(json.dumps(d))
            reactions = [reaction_to_idtvp(rx) for rx in d["reactions"]]
            if i < error_images:
                reactions = reactions[1:] + reactions[:1]  # rotate: a true derangement
            pairs.append((_record(d, reactions), ann))
        return pairs

    @pytest.mark.parametrize("rate", [0.0, 0.2, 0.4])
    def test_injected_rates_recovered_exactly(self, rate):
        rng = random.Random(int(rate * 100))
        n = 10
        pairs = self._inject(rng, n, int(rate * n))
        report = corpus_rates(pairs)
        assert report.image_total == n
        assert report.image_errors == int(rate * n)
        assert report.image_rate == pytest.approx(rate)

    def test_single_reaction_images_excluded_at_image_level(self, rng):
        d1 = make_annotation_dict(rng, "multi", n_reactions=2)
        d2 = make_annotation_dict(rng, "single", n_reactions=1)
        pairs = [
            (_record(d1), parse_ground_truth(json.dumps(d1))),
            (_record(d2), parse_ground_truth(json.dumps(d2))),
        ]
        report = corpus_rates(pairs)
        assert report.image_total == 1
        assert report.excluded_single_reaction_images == 1
        assert report.reaction_total == 3  # reaction level includes the single

    def test_imperfect_images_fully_excluded(self, rng):
        d = make_annotation_dict(rng, "bad", n_reactions=2, with_text=False)
        reactions = [reaction_to_idtvp(rx) for rx in d["reactions"]][:1]  # missing one
        report = corpus_rates([(_record(d, reactions), parse_ground_truth(json.dumps(d)))])
        assert report.image_total == 0 and report.reaction_total == 0

    def test_reaction_level_misplacements_counted(self, rng):
        pairs = self._inject(rng, 5, 2)
        report = corpus_rates(pairs)
        assert report.reaction_total == 15
        assert report.reaction_errors == 6  # two rotated 3-cycles


class TestRateFormat:
    def test_reference_rate_arithmetic(self):
        assert rate_percent(500, 3882) == 12.88
        assert rate_percent(2538, 31300) == 8.11
        assert rate_percent(0, 0) == 0.0

    def test_report_layout(self, rng):
        d = make_annotation_dict(rng, "x", n_reactions=2)
        report = corpus_rates([(_record(d), parse_ground_truth(json.dumps(d)))])
        text = report.to_text()
        assert "Total" in text and "Errors" in text and "Rate (%)" in text
        js = report.to_json()
        assert js["image_level"]["total"] == 1
