import itertools

from rxnkit.joining import JoinedReaction, enrich, join, refine_text
from rxnkit.matching import normalized_edit_distance
from rxnkit.model import Component, Reaction


def vis(reactants, conditions, products):
    def comp(x):
        return Component.of_text(x[1:]) if x.startswith("~") else Component.molecule_id(x)

    return Reaction(
        tuple(comp(x) for x in reactants),
        tuple(comp(x) for x in conditions),
        tuple(comp(x) for x in products),
    )


def textual_record(rid="50", title="Example 50", reactant_ids=("1",), product_id="50", stages=None):
    substances = [
        {"idx": i, "content": r, "amount": "", "chemical_name": r, "is_identifier": True,
         "equivalence": 0.0, "mmol": 0.0, "role": "reactant"}
        for i, r in enumerate(reactant_ids)
    ]
    return {
        "title": title,
        "id": rid,
        "iupac_name": "",
        "procedure": {
            "paragraph": "synthetic procedure text here",
            "substances": substances,
            "reactants": list(range(len(reactant_ids))),
            "catalyst": [],
            "reagents": [],
            "solvent": [],
            "products": [
                {
                    "content": product_id,
                    "production": "420 mg",
                    "yield_ratio": "85",
                    "conversion_rate": "",
                    "stereo_selectivity": "",
                    "ee": "",
                    "dr": "",
                    "rr": "",
                    "appearance": "white solid",
                    "chemical_name": "",
                    "is_identifier": True,
                }
            ],
            "stages": stages
            or [
                {
                    "stage_id": "stage_1",
                    "substances": [0],
                    "time": "12 h",
                    "temperature": "RT",
                    "atmosphere": "N2",
                    "pressure": "",
                    "PH": "",
                    "stirring_speed": "",
                    "vacuum_condition": "",
                    "light_condition": "",
                    "cooling_heating_condition": "",
                    "workup": "concentrated",
                }
            ],
        },
    }


class TestJoin:
    def test_joins_on_product_identifier(self):
        visual = [vis(["1"], [], ["50"])]
        textual = [textual_record()]
        joined, orphan_v, orphan_t = join(visual, textual)
        assert len(joined) == 1 and not orphan_v and not orphan_t
        assert joined[0].textual_index == 0

    def test_record_id_also_keys_the_join(self):
        visual = [vis(["1"], [], ["50"])]
        rec = textual_record(product_id="something else")
        rec["procedure"]["products"][0]["is_identifier"] = False
        joined, _, _ = join(visual, [rec])
        assert len(joined) == 1  # record id "50" carries the join

    def test_tie_break_by_reactant_overlap(self):
        visual = [vis(["1"], [], ["3"])]
        candidates = [
            textual_record(rid="3", reactant_ids=("7",)),
            textual_record(rid="3", reactant_ids=("1",)),
        ]
        joined, _, _ = join(visual, candidates)
        assert joined[0].textual_index == 1

    def test_tie_break_exhaustive_small_cases(self):
        """All orderings of candidates with overlap 0/1/2: the winner is the
        largest reactant overlap, earliest record on ties."""
        visual = [vis(["1", "2"], [], ["3"])]
        base = {0: ("x",), 1: ("1",), 2: ("1", "2")}
        for order in itertools.permutations([0, 1, 2]):
            textual = [textual_record(rid="3", reactant_ids=base[k]) for k in order]
            joined, _, _ = join(visual, textual)
            overlaps = [len({"1", "2"} & set(base[k])) for k in order]
            best = max(overlaps)
            expected_index = overlaps.index(best)
            assert joined[0].textual_index == expected_index, order

    def test_virtual_only_reaction_is_orphan(self):
        visual = [vis(["v1"], [], ["v2"])]
        joined, orphan_v, orphan_t = join(visual, [textual_record()])
        assert not joined and orphan_v == [0] and orphan_t == [0]

    def test_deterministic(self):
        visual = [vis(["1"], [], ["50"]), vis(["2"], [], ["51"])]
        textual = [textual_record(), textual_record(rid="51", product_id="51")]
        a = join(visual, textual)
        b = join(visual, textual)
        assert a == b

    def test_at_most_one_textual_per_visual(self):
        visual = [vis(["1"], [], ["50"])]
        textual = [textual_record(), textual_record(title="Example 50 dup")]
        joined, _, _ = join(visual, textual)
        assert len(joined) == 1


class TestRefineText:
    def make_joined(self, cond_text):
        visual = [vis(["1"], ["~" + cond_text], ["50"])]
        textual = [textual_record(stages=[{
            "stage_id": "stage_1", "substances": [0], "time": "", "temperature": "NaOH",
            "atmosphere": "", "pressure": "", "PH": "", "stirring_speed": "",
            "vacuum_condition": "", "light_condition": "", "cooling_heating_condition": "",
            "workup": "",
        }])]
        joined, _, _ = join(visual, textual)
        return joined[0], textual

    def test_close_text_replaced_and_logged(self):
        j, textual = self.make_joined("NaQH")
        assert normalized_edit_distance("NaQH", "NaOH") == 0.25
        out = refine_text(j, textual, ned_gate=0.3)
        assert out.visual.conditions[0].text == "NaOH"
        (entry,) = out.refinements
        assert entry["original"] == "NaQH" and entry["replacement"] == "NaOH"
        assert entry["ned"] == 0.25

    def test_identical_text_not_logged(self):
        j, textual = self.make_joined("NaOH")
        out = refine_text(j, textual)
        assert out.refinements == ()
        assert out.visual == j.visual

    def test_distant_text_flagged_untouched(self):
        j, textual = self.make_joined("reflux overnight at ambient temperature")
        out = refine_text(j, textual, ned_gate=0.3)
        assert out.visual.conditions[0].text == "reflux overnight at ambient temperature"
        assert out.refinements == ()
        assert out.flags and out.flags[0]["closest_ned"] > 0.3

    def test_molecules_never_touched(self):
        j, textual = self.make_joined("NaQH")
        out = refine_text(j, textual)
        assert out.visual.reactants == j.visual.reactants
        assert out.visual.products == j.visual.products


class TestEnrich:
    def test_product_and_stage_attributes_attached(self):
        visual = [vis(["1"], [], ["50"])]
        textual = [textual_record()]
        joined, _, _ = join(visual, textual)
        out = enrich(joined[0], textual)
        assert out.enrichments["yield_ratio"] == [{"value": "85", "stage_id": None}]
        assert {"value": "RT", "stage_id": "stage_1"} in out.enrichments["temperature"]
        assert {"value": "12 h", "stage_id": "stage_1"} in out.enrichments["time"]
        assert {"value": "N2", "stage_id": "stage_1"} in out.enrichments["atmosphere"]

    def test_enrichment_is_additive(self):
        visual = [vis(["1"], ["~NaOH"], ["50"])]
        textual = [textual_record()]
        joined, _, _ = join(visual, textual)
        out = enrich(joined[0], textual)
        assert out.visual == joined[0].visual  # bit-identical visual side

    def test_empty_fields_not_attached(self):
        visual = [vis(["1"], [], ["50"])]
        textual = [textual_record()]
        joined, _, _ = join(visual, textual)
        out = enrich(joined[0], textual)
        assert "pressure" not in out.enrichments
