"""Command-line entry point. All subcommands are thin adapters over the
library modules: argument parsing and file wiring only.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import idmap, matching, model, order_analysis, refine, reward

log = logging.getLogger("rxnkit")


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line for line in fh if line.strip()]


def _load_gt(path: str):
    return model.load_annotations(_read_lines(path))


def _load_maps(path: str | None):
    if not path:
        return None
    return idmap.load_map_file(_read_lines(path))


def _add_threshold_flags(p: argparse.ArgumentParser):
    p.add_argument("--iou", type=float, default=0.5, help="IoU threshold for molecule pairing")
    p.add_argument("--ned", type=float, default=0.2, help="normalized edit distance threshold for text pairing")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    errors = []
    valid = 0
    for n, line in enumerate(_read_lines(args.gt), start=1):
        try:
            model.parse_ground_truth(line)
            valid += 1
        except model.AnnotationError as e:
            errors.append({"line": n, "path": e.path, "reason": e.reason})
    if args.json:
        print(json.dumps({"valid": valid, "errors": errors}, ensure_ascii=False, indent=2))
    else:
        for e in errors:
            print(f"line {e['line']}: {e['path']}: {e['reason']}")
        print(f"{valid} valid record(s), {len(errors)} error(s)")
    return 1 if errors else 0


def cmd_evaluate(args) -> int:
    gt = _load_gt(args.gt)
    records = list(model.load_prediction_records(_read_lines(args.pred), args.format))
    configs = {
        "soft": matching.MatchConfig(args.iou, args.ned, "soft"),
        "hybrid": matching.MatchConfig(args.iou, args.ned, "hybrid"),
    }
    report = matching.evaluate_corpus(gt, records, configs, _load_maps(args.map), jobs=args.jobs)
    print(matching.report_to_json_text(report) if args.json else report.to_text())
    return 0


def cmd_reward(args) -> int:
    gt = _load_gt(args.gt)
    maps = _load_maps(args.map)
    spec = reward.RewardSpec.from_ratio(args.ratio, args.iou, args.ned)
    records = list(model.load_prediction_records(_read_lines(args.pred), args.format))
    for rec in records:
        if rec.image_id not in gt:
            print(f"prediction for unknown image_id {rec.image_id!r}", file=sys.stderr)
            return 1

    def score(rec):
        id_map = maps.get(rec.image_id) if maps else None
        return reward.sample_reward(rec.raw, gt[rec.image_id], id_map, rec.format, spec)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(score, records))
    else:
        results = [score(rec) for rec in records]

    mean = sum(r.reward for r in results) / len(results) if results else 0.0
    if args.json:
        out = {
            "samples": [
                {"image_id": rec.image_id, **res.to_json()} for rec, res in zip(records, results)
            ],
            "mean_reward": mean,
        }
        print(json.dumps(out, ensure_ascii=False, indent=2))
    else:
        for rec, res in zip(records, results):
            print(
                f"{rec.image_id}\treward={res.reward:.6f}\tsoft={res.soft_component:.6f}"
                f"\thybrid={res.hybrid_component:.6f}\tparse_ok={res.parse_ok}"
            )
        print(f"mean_reward={mean:.6f} over {len(results)} sample(s)")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    spec = reward.RewardSpec.from_ratio(args.ratio, args.iou, args.ned)
    serve(args.gt, port=args.port, host=args.host, spec=spec, max_batch=args.max_batch, map_path=args.map)
    return 0


def cmd_render(args) -> int:
    import numpy as np
    from PIL import Image

    from . import render as rendermod

    records = [json.loads(line) for line in _read_lines(args.manifest)]
    image_path = Path(args.image)
    stem = image_path.stem
    record = records[0] if len(records) == 1 else next((r for r in records if r.get("image_id") == stem), None)
    if record is None:
        print(f"no manifest record for image_id {stem!r}", file=sys.stderr)
        return 1
    pil = Image.open(image_path)
    if pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB")
    arr = np.asarray(pil)
    boxes = {int(m["mol_index"]): model.Box.from_seq(m["bbox"]) for m in record.get("molecules", [])}
    labels = [model.Box.from_seq(b) for b in record.get("existing_labels", [])]
    to_draw = [(int(d["mol_index"]), str(d["text"])) for d in record.get("draw", [])]
    cfg = rendermod.RenderConfig(ink_threshold=args.ink_threshold, min_glyph=args.min_glyph)
    stamped, placements, errors = rendermod.render_all(arr, boxes, to_draw, cfg, existing_labels=labels)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_id = record.get("image_id", stem)
    Image.fromarray(stamped).save(out_dir / f"{image_id}.png")
    with open(out_dir / f"{image_id}.placements.jsonl", "w", encoding="utf-8") as fh:
        for p in placements:
            fh.write(json.dumps(p.to_json(), ensure_ascii=False) + "\n")
        for e in errors:
            fh.write(json.dumps(e, ensure_ascii=False) + "\n")
    print(f"{len(placements)} placement(s), {len(errors)} error(s) -> {out_dir / (image_id + '.png')}")
    return 0


def cmd_refine(args) -> int:
    result = refine.refine_stream(_read_lines(args.infile))
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in result.standards:
            fh.write(refine.dump_record(rec) + "\n")
    if args.drops:
        with open(args.drops, "w", encoding="utf-8") as fh:
            for drop in result.drops:
                fh.write(json.dumps(drop.to_json(), ensure_ascii=False) + "\n")
    if args.changelog:
        with open(args.changelog, "w", encoding="utf-8") as fh:
            for entry in result.changelog:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    print(
        f"{result.inputs} record(s) in -> {len(result.standards)} standard(s) out, "
        f"{len(result.drops)} dropped"
    )
    return 0 if result.conserved() else 1


def cmd_join(args) -> int:
    from . import joining

    textual = [json.loads(line) for line in _read_lines(args.textual)]
    out_lines = []
    total = joined_count = 0
    all_textual_used: set[int] = set()
    for rec in model.load_prediction_records(_read_lines(args.visual)):
        parsed = model.parse_prediction(rec.raw, rec.format)
        if isinstance(parsed, model.ParseFailure):
            out_lines.append({"image_id": rec.image_id, "error": f"parse failure: {parsed.kind}"})
            continue
        reactions = list(parsed.reactions)
        joined, orphan_v, _ = joining.join(reactions, textual)
        by_index = {j.visual_index: j for j in joined}
        for vi, rx in enumerate(reactions):
            total += 1
            j = by_index.get(vi)
            if j is None:
                out_lines.append(
                    {"image_id": rec.image_id, "reaction_index": vi, "visual": rx.to_json(), "joined": False}
                )
                continue
            j = joining.enrich(joining.refine_text(j, textual, args.ned_gate), textual)
            all_textual_used.add(j.textual_index)
            joined_count += 1
            t = textual[j.textual_index]
            out_lines.append(
                {
                    "image_id": rec.image_id,
                    "reaction_index": vi,
                    "visual": j.visual.to_json(),
                    "joined": True,
                    "textual_ref": {"index": j.textual_index, "id": t.get("id", ""), "title": t.get("title", "")},
                    "refinements": list(j.refinements),
                    "enrichments": j.enrichments,
                    "low_confidence": list(j.flags),
                }
            )
    orphan_textual = [ti for ti in range(len(textual)) if ti not in all_textual_used]
    out_lines.append(
        {
            "summary": {
                "visual_total": total,
                "joined": joined_count,
                "textual_total": len(textual),
                "textual_orphans": orphan_textual,
            }
        }
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in out_lines:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    print(f"{joined_count}/{total} visual reaction(s) joined; {len(orphan_textual)} textual orphan(s)")
    return 0


def cmd_analyze_order(args) -> int:
    gt = _load_gt(args.gt)
    maps = _load_maps(args.map)
    pairs = []
    for rec in model.load_prediction_records(_read_lines(args.pred)):
        if rec.image_id not in gt:
            print(f"prediction for unknown image_id {rec.image_id!r}", file=sys.stderr)
            return 1
        pairs.append((rec, gt[rec.image_id]))
    cfg = matching.MatchConfig(args.iou, args.ned, "hybrid")
    report = order_analysis.corpus_rates(pairs, cfg, maps)
    text = json.dumps(report.to_json(), ensure_ascii=False, indent=2) if args.json else report.to_text()
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
        print(f"report written to {args.report}")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rxnkit", description="Reaction-diagram parse toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="strictly validate a ground-truth annotation-lines file")
    p.add_argument("--gt", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", help="corpus P/R/F1 under soft and hybrid matching")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--map", help="identifier-map lines file (defaults to maps derived from GT)")
    p.add_argument("--format", choices=model.FORMATS, default="idtvp",
                   help="format for prediction records that do not carry one")
    _add_threshold_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reward", help="per-sample verifiable rewards")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--map")
    p.add_argument("--ratio", default="1:1", help="soft:hybrid weighting, e.g. 1:0, 0:1, 1:1")
    p.add_argument("--format", choices=model.FORMATS, default="idtvp",
                   help="format for prediction records that do not carry one")
    _add_threshold_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("serve", help="run the reward HTTP service")
    p.add_argument("--gt", required=True)
    p.add_argument("--map")
    p.add_argument("--port", type=int, default=8972, help="overridden by RXN_REWARD_PORT")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ratio", default="1:1")
    _add_threshold_flags(p)
    p.add_argument("--max-batch", type=int, default=512)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("render", help="stamp identifiers onto a diagram without occluding ink")
    p.add_argument("--image", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ink-threshold", type=float, default=0.01)
    p.add_argument("--min-glyph", type=int, default=8)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("refine", help="validate/correct/canonicalize textual reaction records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--drops")
    p.add_argument("--changelog")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("join", help="join visual parses with textual records by identifier")
    p.add_argument("--visual", required=True, help="prediction-lines file (idtvp)")
    p.add_argument("--textual", required=True, help="standard-reaction lines file")
    p.add_argument("--out", required=True)
    p.add_argument("--ned-gate", type=float, default=0.3)
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("analyze-order", help="serialization-order statistics over set-perfect samples")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--map")
    p.add_argument("--report", help="output path (stdout when omitted)")
    _add_threshold_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze_order)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (model.AnnotationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
