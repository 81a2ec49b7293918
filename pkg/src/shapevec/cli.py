"""Command-line entry point: ``shapevec <command> [options]``.

Exit status: 0 success, 2 usage error, 3 data error (unreadable or invalid
input), 4 numerical failure (singular transform, diverged refinement).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (
    DESK_SCALE,
    EXISTENCE,
    PAPER_SCALE,
    RELATIVE,
    GenerationError,
    QaPair,
    ShapeGenConfig,
    TransformGenConfig,
    gen_dataset,
    gen_vqa,
    vqa_jsonl,
)
from .io import atomic_write_text, read_png, write_png
from .metrics import MetricReport, complexity_stats, evaluate_pair
from .parser import ParseError, parse_svg, serialize_svg
from .predict import IDENTITY_TRANSFORMS, ExternalPredictor, HeuristicPredictor, predict_svg
from .raster import RenderConfig, SingularTransformError, render, render_oracle, unflatten
from .refine import DIVERGED, RefineConfig, refine

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("shapevec")


class NumericalFailure(RuntimeError):
    pass


def _read_svg(path: str, lenient: bool = False):
    return parse_svg(Path(path).read_text(encoding="utf-8"), lenient=lenient)


def _dump_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# Commands


def cmd_gen(args) -> int:
    n = args.n if args.n is not None else (PAPER_SCALE if args.paper_scale else DESK_SCALE)[args.kind]
    shape_cfg = ShapeGenConfig(canvas=args.canvas, decimals=args.decimals,
                               **({"size_range": tuple(args.size_range)}
                                  if args.size_range and args.kind == "shape" else {}))
    transform_cfg = TransformGenConfig(canvas=args.canvas, decimals=args.decimals,
                                       **({"size_range": tuple(args.size_range)}
                                          if args.size_range and args.kind == "transform" else {}))
    gen_dataset(n, args.seed, args.kind, args.out, vqa_count=args.vqa_count,
                workers=args.threads, shape_cfg=shape_cfg, transform_cfg=transform_cfg)
    print(f"wrote {n} {args.kind} samples to {args.out}")
    return EXIT_OK


def cmd_render(args) -> int:
    doc = _read_svg(args.svg, args.lenient)
    img = render_oracle(doc, args.ss) if args.oracle else render(doc, RenderConfig(eps=args.eps))
    write_png(args.out, img)
    return EXIT_OK


def cmd_predict(args) -> int:
    img = read_png(args.image)
    if args.external:
        predictor = ExternalPredictor(args.external)
    elif args.transforms is not None:
        predictor = HeuristicPredictor(grid=False, transform_kinds=tuple(args.transforms))
    else:
        predictor = HeuristicPredictor()
    doc = predict_svg(img, predictor)
    atomic_write_text(args.out, serialize_svg(doc))
    print(f"predicted {len(doc.shapes)} shapes")
    return EXIT_OK


def cmd_refine(args) -> int:
    doc = _read_svg(args.svg, args.lenient)
    target = read_png(args.target)
    cfg = RefineConfig(alpha=args.alpha, beta=args.beta, max_iters=args.iters,
                       lr_geometry=args.lr_geometry, lr_color=args.lr_color,
                       render=RenderConfig(eps=args.eps))
    trace_lines: list[str] = []
    snap_dir = Path(args.snapshot_dir) if args.snapshot_dir else None

    def callback(it, loss, pv):
        trace_lines.append(json.dumps({"iteration": it, "loss": loss}))
        if snap_dir is not None and it % args.snapshot_every == 0:
            try:
                snap = unflatten(doc, pv)
            except ValueError:
                return
            atomic_write_text(snap_dir / f"iter_{it:06d}.svg", serialize_svg(snap))

    out, trace = refine(doc, target, cfg, callback)
    atomic_write_text(args.out, serialize_svg(out, args.precision))
    if args.trace:
        atomic_write_text(args.trace, "".join(line + "\n" for line in trace_lines))
    best = min(trace.losses[:1] + [v for v in trace.losses if np.isfinite(v)])
    print(f"iterations={trace.iterations} reason={trace.reason} "
          f"initial_loss={trace.losses[0]:.6f} final_loss={best:.6f}")
    if trace.reason == DIVERGED:
        raise NumericalFailure("refinement diverged; best-so-far document written")
    return EXIT_OK


def _eval_one(item: tuple[str, str, str]):
    name, target_path, pred_path = item
    target = read_png(target_path)
    if pred_path.endswith(".svg"):
        pred = render_oracle(_read_svg(pred_path, lenient=True), 4)
    else:
        pred = read_png(pred_path)
    return evaluate_pair(name, target, pred)


def cmd_eval(args) -> int:
    root = Path(args.pairs)
    targets = sorted((root / "png").glob("*.png"))
    if not targets:
        raise FileNotFoundError(f"no target images in {root / 'png'}")
    items, svgs = [], []
    for t in targets:
        svg, png = root / "pred" / f"{t.stem}.svg", root / "pred" / f"{t.stem}.png"
        pred = svg if svg.exists() else png
        if not pred.exists():
            raise FileNotFoundError(f"no prediction for {t.name} in {root / 'pred'}")
        if pred.suffix == ".svg":
            svgs.append(pred)
        items.append((t.stem, str(t), str(pred)))
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_eval_one, items))
    else:
        rows = [_eval_one(i) for i in items]
    report = MetricReport(rows)
    complexity = complexity_stats(svgs)
    obj = {"images": report.to_json(), "complexity": complexity.to_json()}
    if args.report:
        _dump_json(args.report, obj)
    print(report.to_table(), end="")
    if svgs:
        print(complexity.to_table(), end="")
    return EXIT_OK


def cmd_vqa(args) -> int:
    doc = _read_svg(args.svg, args.lenient)
    batch = gen_vqa(doc, args.seed, args.count)
    atomic_write_text(args.out, vqa_jsonl(batch))
    if not batch.balanced:
        print("warning: yes/no answers could not be balanced for this document", file=sys.stderr)
    return EXIT_OK


def _read_jsonl(paths: list[str]) -> list[dict]:
    rows = []
    for p in paths:
        for n, line in enumerate(Path(p).read_text(encoding="utf-8").splitlines(), 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise ValueError(f"{p}:{n}: invalid JSON ({e.msg})") from None
    return rows


def score_vqa(answers: list[str], truth: list[QaPair]) -> dict:
    """Accuracies in percent.  ``acc`` is the mean of the existence (acc1)
    and relative-position (acc2) accuracies."""
    if len(answers) != len(truth):
        raise ValueError(f"{len(answers)} answers for {len(truth)} questions")
    hits = {EXISTENCE: [], RELATIVE: []}
    for ans, qa in zip(answers, truth):
        hits[qa.kind].append(str(ans).strip().lower() == qa.answer)
    acc = {k: 100.0 * sum(v) / len(v) if v else float("nan") for k, v in hits.items()}
    acc1, acc2 = acc[EXISTENCE], acc[RELATIVE]
    return {"acc": (acc1 + acc2) / 2, "acc1": acc1, "acc2": acc2,
            "n1": len(hits[EXISTENCE]), "n2": len(hits[RELATIVE])}


def cmd_vqa_eval(args) -> int:
    try:
        truth = [QaPair.from_json(o) for o in _read_jsonl(args.truth)]
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed truth record: {e}") from None
    answers = [o.get("answer") for o in _read_jsonl(args.answers)]
    scores = score_vqa(answers, truth)
    if args.report:
        _dump_json(args.report, scores)
    print(f"acc={scores['acc']:.3f} acc1={scores['acc1']:.3f} acc2={scores['acc2']:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="shapevec", formatter_class=fmt,
                                description="Synthetic SVG datasets, differentiable rendering "
                                            "and raster-to-SVG refinement.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen", help="generate a dataset", formatter_class=fmt)
    g.add_argument("--kind", choices=("shape", "transform"), required=True)
    g.add_argument("--n", type=int, default=None,
                   help="sample count (default: 1000, or 50000/500000 with --paper-scale)")
    g.add_argument("--paper-scale", action="store_true", help="use full-size dataset counts")
    g.add_argument("--seed", type=int, default=0, help="base random seed")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--threads", type=int, default=1, help="worker processes")
    g.add_argument("--vqa-count", type=int, default=0,
                   help="questions per kind per sample (0 disables VQA output)")
    g.add_argument("--canvas", type=int, default=384, help="canvas side in pixels")
    g.add_argument("--size-range", type=float, nargs=2, metavar=("LO", "HI"), default=None,
                   help="shape size range (default: 0.25 0.45 of a cell for shape, "
                        "0.15 0.35 of the canvas for transform)")
    g.add_argument("--decimals", type=int, default=3, help="decimal places of emitted numbers")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("render", help="rasterize an SVG", formatter_class=fmt)
    r.add_argument("--svg", required=True)
    r.add_argument("--out", required=True, help="output PNG")
    r.add_argument("--oracle", action="store_true", help="hard supersampled renderer")
    r.add_argument("--ss", type=int, default=16, help="oracle supersampling per axis")
    r.add_argument("--eps", type=float, default=1.0, help="soft-edge width in pixels")
    r.add_argument("--lenient", action="store_true", help="ignore unknown attributes")
    r.set_defaults(func=cmd_render)

    pr = sub.add_parser("predict", help="predict an SVG from a PNG", formatter_class=fmt)
    pr.add_argument("--image", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--external", default=None, help="use this SVG file as the prediction")
    pr.add_argument("--transforms", nargs="*", default=None, choices=sorted(IDENTITY_TRANSFORMS),
                    help="single-shape mode with identity transforms of these kinds")
    pr.set_defaults(func=cmd_predict)

    rf = sub.add_parser("refine", help="fit SVG parameters to a target PNG", formatter_class=fmt)
    rf.add_argument("--svg", required=True)
    rf.add_argument("--target", required=True)
    rf.add_argument("--out", required=True)
    rf.add_argument("--iters", type=int, default=500, help="maximum optimizer steps")
    rf.add_argument("--alpha", type=float, default=1.0, help="weight of mean-abs residual")
    rf.add_argument("--beta", type=float, default=1.0, help="weight of RMS residual")
    rf.add_argument("--eps", type=float, default=1.0, help="soft-edge width in pixels")
    rf.add_argument("--lr-geometry", type=float, default=0.5, help="base step for positions/sizes")
    rf.add_argument("--lr-color", type=float, default=0.01, help="base step for colors")
    rf.add_argument("--precision", type=int, default=None,
                    help="decimal places in the output SVG; None keeps shortest exact form")
    rf.add_argument("--trace", default=None, help="write per-iteration losses as JSON lines")
    rf.add_argument("--snapshot-dir", default=None, help="write intermediate SVGs here")
    rf.add_argument("--snapshot-every", type=int, default=50, help="iterations between snapshots")
    rf.add_argument("--lenient", action="store_true", help="ignore unknown attributes")
    rf.set_defaults(func=cmd_refine)

    ev = sub.add_parser("eval", help="image metrics over a directory of pairs", formatter_class=fmt,
                        description="Compares DIR/png/NAME.png with DIR/pred/NAME.svg "
                                    "(rendered with the 4x oracle) or DIR/pred/NAME.png.")
    ev.add_argument("--pairs", required=True, metavar="DIR")
    ev.add_argument("--report", default=None, help="write a JSON report here")
    ev.add_argument("--threads", type=int, default=1, help="worker processes")
    ev.set_defaults(func=cmd_eval)

    vq = sub.add_parser("vqa", help="questions and answers for one SVG", formatter_class=fmt)
    vq.add_argument("--svg", required=True)
    vq.add_argument("--seed", type=int, default=0, help="question sampling seed")
    vq.add_argument("--count", type=int, default=2, help="questions per kind")
    vq.add_argument("--out", required=True, help="output JSONL")
    vq.add_argument("--lenient", action="store_true", help="ignore unknown attributes")
    vq.set_defaults(func=cmd_vqa)

    ve = sub.add_parser("vqa-eval", help="score answers against ground truth", formatter_class=fmt,
                        description="Each answers line needs an \"answer\" field; lines pair "
                                    "with truth lines by position.")
    ve.add_argument("--answers", required=True, nargs="+")
    ve.add_argument("--truth", required=True, nargs="+")
    ve.add_argument("--report", default=None, help="write a JSON report here")
    ve.set_defaults(func=cmd_vqa_eval)
    return p


def _check_args(p: argparse.ArgumentParser, args) -> None:
    for name in ("n", "threads", "ss", "snapshot_every", "count"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            p.error(f"--{name.replace('_', '-')} must be >= 1")
    for name in ("iters", "vqa_count", "precision"):
        v = getattr(args, name, None)
        if v is not None and v < 0:
            p.error(f"--{name.replace('_', '-')} must be >= 0")
    if getattr(args, "eps", 1.0) <= 0:
        p.error("--eps must be positive")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_args(parser, args)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SingularTransformError, NumericalFailure) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, GenerationError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
