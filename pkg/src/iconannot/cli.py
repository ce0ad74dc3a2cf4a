"""Command-line entry point: ``iconannot <subcommand> [flags]``.

Subcommands: generate, train, predict, evaluate, report, stats. Every run
echoes its resolved configuration to ``<out>/run_config.json``; passing that
file back through ``--config`` repeats the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .checkpoint import CheckpointError
from .corpus import CorpusError, Detection, UISample, corpus_stats, load_corpus, read_annotations
from .detector.train import TrainingDiverged
from .evaluation import STANDARD, STARRED, evaluate, per_class_csv, render_table, report_json

log = logging.getLogger("iconannot")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_CHECKPOINT = 4
EXIT_BAD_INPUT = 5
EXIT_DIVERGED = 6


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Helpers


def _load_config(path: Optional[str]) -> dict:
    """Read a JSON config; a previous run_config.json contributes its "config"."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(p)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{p}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise CorpusError(f"{p}: config must be a JSON object")
    if "subcommand" in obj and "config" in obj:
        obj = obj["config"]
    return obj


def _echo(out: Path, subcommand: str, args: argparse.Namespace, config: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    record = {"subcommand": subcommand, "version": __version__, "flags": flags, "config": config}
    (out / "run_config.json").write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _corpus_dir(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def _read_predictions(path: str) -> dict[str, list[Detection]]:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(p)
    out: dict[str, list[Detection]] = {}
    with open(p, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[str(rec["id"])] = [Detection.from_json(d) for d in rec.get("detections", [])]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{p}:{n}: bad prediction record ({exc})") from exc
    return out


def _ground_truth(data: str) -> dict[str, list]:
    """Annotations keyed by sample id, from a corpus dir or an annotations file."""
    p = _corpus_dir(data)
    ann_path = p / "annotations.jsonl" if p.is_dir() else p
    if not ann_path.is_file():
        raise FileNotFoundError(ann_path)
    return {k: list(v) for k, v in read_annotations(ann_path).items()}


def _aligned(gt: dict[str, list], preds: dict[str, list[Detection]], source: str):
    unknown = sorted(set(preds) - set(gt))
    if unknown:
        raise CorpusError(f"{source}: predictions for ids missing from the ground truth, e.g. {unknown[:3]}")
    ids = sorted(gt)
    return [preds.get(i, []) for i in ids], [gt[i] for i in ids]


def _parse_named(items: Sequence[str]) -> list[tuple[str, str]]:
    out = []
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        out.append((name, path))
    return out


# --------------------------------------------------------------------------
# Subcommands


def run_generate(args: argparse.Namespace) -> int:
    from .synthgen import GenConfig, generate

    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.n_samples is not None:
        cfg["n_samples"] = args.n_samples
    if args.p_drop is not None:
        cfg["p_drop_node"] = args.p_drop
    gen = GenConfig.from_json(cfg)
    out = Path(args.out)
    _echo(out, "generate", args, gen.to_json())
    manifest = generate(gen, out)
    print(f"wrote {len(manifest.samples)} samples to {out}")
    return EXIT_OK


def run_train(args: argparse.Namespace) -> int:
    from .pipeline import ModelSpec, train_model

    if args.seed is None:
        raise UsageError("train requires --seed")
    if args.model is None:
        raise UsageError("train requires --model")
    spec = ModelSpec.from_json(args.model, _load_config(args.config))
    samples = load_corpus(_corpus_dir(args.data))
    if not samples:
        raise CorpusError(f"{args.data}: corpus is empty")
    out = Path(args.out)
    _echo(out, "train", args, spec.to_json())
    trained = train_model(spec, samples, args.seed, out)
    last = trained.log[-1] if trained.log else {}
    print(f"trained {spec.model_type} on {len(samples)} samples; last epoch {json.dumps(last, sort_keys=True)}")
    return EXIT_OK


def _write_overlays(samples: Sequence[UISample], dets: Sequence[list[Detection]], out: Path) -> None:
    from PIL import Image, ImageDraw

    out.mkdir(parents=True, exist_ok=True)
    for s, ds in zip(samples, dets):
        img = Image.fromarray(s.pixels)
        draw = ImageDraw.Draw(img)
        h, w = s.pixels.shape[:2]
        for a in s.annotations:
            b = a.bbox
            draw.rectangle([b.x_min * w, b.y_min * h, b.x_max * w - 1, b.y_max * h - 1], outline=(0, 200, 0))
        for d in ds:
            b = d.bbox
            draw.rectangle([b.x_min * w, b.y_min * h, b.x_max * w - 1, b.y_max * h - 1], outline=(230, 0, 0))
            draw.text((b.x_min * w + 1, b.y_min * h + 1), f"{d.label.value} {d.score:.2f}", fill=(230, 0, 0))
        img.save(out / f"{s.id}.png")


def run_predict(args: argparse.Namespace) -> int:
    from .pipeline import load_model, predict_samples

    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise FileNotFoundError(ckpt)
    model = load_model(ckpt)
    samples = load_corpus(_corpus_dir(args.data))
    out = Path(args.out)
    _echo(out, "predict", args, {"checkpoint": str(ckpt), "threshold": args.threshold})
    dets = predict_samples(model, samples, args.threshold)
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as f:
        for s, ds in zip(samples, dets):
            kept = [d for d in ds if d.score >= args.threshold]
            f.write(json.dumps({"id": s.id, "detections": [d.to_json() for d in kept]}, sort_keys=True) + "\n")
    if args.overlays:
        _write_overlays(samples, dets, out / "overlays")
    print(f"wrote predictions for {len(samples)} samples to {out / 'predictions.jsonl'}")
    return EXIT_OK


def run_evaluate(args: argparse.Namespace) -> int:
    gt = _ground_truth(args.data)
    out = Path(args.out)
    mode = STARRED if args.starred else STANDARD
    named = _parse_named(args.predictions)
    _echo(out, "evaluate", args, {"mode": mode, "threshold": args.threshold, "predictions": dict(named)})
    reports = {}
    for name, path in named:
        dets, anns = _aligned(gt, _read_predictions(path), path)
        reports[name] = evaluate(dets, anns, mode, args.threshold, class_aware=not args.class_agnostic)
    if len(reports) == 1:
        (out / "metrics.json").write_text(report_json(next(iter(reports.values()))) + "\n", encoding="utf-8")
    else:
        (out / "metrics.json").write_text(
            json.dumps({k: r.to_json() for k, r in reports.items()}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    table = render_table(reports)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


def run_report(args: argparse.Namespace) -> int:
    """Table 2/3-style comparison: one row per model, starred rows for baselines."""
    gt = _ground_truth(args.data)
    out = Path(args.out)
    named = _parse_named(args.predictions)
    _echo(out, "report", args, {"threshold": args.threshold, "predictions": dict(named)})
    rows, standard = {}, {}
    for name, path in named:
        dets, anns = _aligned(gt, _read_predictions(path), path)
        standard[name] = rows[name] = evaluate(dets, anns, STANDARD, args.threshold)
        if name.startswith("baseline"):
            rows[name + "*"] = evaluate(dets, anns, STARRED, args.threshold)
    train_counts: dict[str, int] = {}
    if args.train_data:
        stats = corpus_stats(load_corpus(_corpus_dir(args.train_data)))
        train_counts = {c.value: n for c, n in stats.class_counts.items()}
    table = render_table(rows)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    (out / "per_class.csv").write_text(per_class_csv(standard, train_counts), encoding="utf-8")
    (out / "metrics.json").write_text(
        json.dumps({k: r.to_json() for k, r in rows.items()}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    print(table)
    return EXIT_OK


def run_stats(args: argparse.Namespace) -> int:
    samples = load_corpus(_corpus_dir(args.data))
    stats = corpus_stats(samples)
    table = stats.table()
    if args.out:
        out = Path(args.out)
        _echo(out, "stats", args, {})
        (out / "stats.json").write_text(json.dumps(stats.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / "stats.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    from .pipeline import MODEL_TYPES

    parser = argparse.ArgumentParser(prog="iconannot", description="Icon annotation with view-hierarchy features.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus")
    p.add_argument("--config", help="GenConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--p-drop", type=float, help="probability an icon's VH node is omitted")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_generate)

    p = sub.add_parser("train", help="train one model type on a corpus")
    p.add_argument("--model", choices=MODEL_TYPES)
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--config", help="model JSON with detector / detector_train / classifier / classifier_train sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_train)

    p = sub.add_parser("predict", help="write detections for a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--overlays", action="store_true", help="also write box-overlay PNGs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_predict)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--data", required=True, help="corpus directory or annotations.jsonl")
    p.add_argument("--predictions", required=True, nargs="+", help="predictions.jsonl, optionally NAME=PATH")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--starred", action="store_true", help="recall over VH-matched icons only")
    p.add_argument("--class-agnostic", action="store_true", help="match centers regardless of label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("report", help="side-by-side table and per-class CSV for several models")
    p.add_argument("--data", required=True)
    p.add_argument("--predictions", required=True, nargs="+", help="NAME=PATH per model")
    p.add_argument("--train-data", help="training corpus, for per-class counts")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_report)

    p = sub.add_parser("stats", help="per-class icon counts")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=run_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if hasattr(args, "threshold") and not 0.0 <= args.threshold <= 1.0:
        print("error: --threshold must lie in [0, 1]", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CHECKPOINT
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CorpusError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
