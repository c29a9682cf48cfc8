"""Builds the client round-trip fixture: a ground-truth store, 50 samples,
and golden rewards computed through the library directly (no HTTP).

Run from the repository root:

    python3 frontend/scripts/gen_fixture.py
"""

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from conftest import degraded_raw, make_annotation_dict, perfect_raw  # noqa: E402

from rxnkit.model import load_annotations  # noqa: E402
from rxnkit.reward import RewardSpec, sample_reward  # noqa: E402

OUT = ROOT / "frontend" / "test" / "fixtures"


def main():
    rng = random.Random(50_50)
    dicts = {f"im{i}": make_annotation_dict(rng, f"im{i}") for i in range(10)}
    gt_lines = [json.dumps(d) for d in dicts.values()]
    store = load_annotations(gt_lines)

    samples = []
    for i in range(50):
        image_id = f"im{i % 10}"
        bucket = i % 5
        if bucket == 0:
            raw = perfect_raw(dicts[image_id], rng)
        elif bucket == 4:
            raw = rng.choice(["garbage{{{", "", "[{\"reactants\": [\"1\"", "not json at all"])
        else:
            raw = degraded_raw(dicts[image_id], rng)
        samples.append({"sample_id": f"s{i}", "image_id": image_id, "raw": raw, "format": "idtvp"})

    spec = RewardSpec.from_ratio("1:1")
    golden = []
    for s in samples:
        res = sample_reward(s["raw"], store[s["image_id"]], spec=spec)
        golden.append(
            {
                "sample_id": s["sample_id"],
                "reward": res.reward,
                "soft_component": res.soft_component,
                "hybrid_component": res.hybrid_component,
                "parse_ok": res.parse_ok,
            }
        )

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "gt.lines").write_text("\n".join(gt_lines) + "\n", encoding="utf-8")
    (OUT / "samples.json").write_text(json.dumps(samples, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    (OUT / "golden.json").write_text(json.dumps(golden, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(gt_lines)} GT lines, {len(samples)} samples, {len(golden)} golden rewards -> {OUT}")


if __name__ == "__main__":
    main()
