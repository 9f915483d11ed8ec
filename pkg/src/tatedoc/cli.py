"""Command-line front end: extract, qc flag/apply, split, synth, eval, render.

Exit codes: 0 success, 2 usage/config error, 3 some pages failed (output
still written for the rest), 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .coco import (
    PAGE_TYPE_NAMES,
    from_text,
    layouts_from_coco,
    split_dataset,
    to_coco,
    to_text,
)
from .errors import ParseError, TatedocError
from .geometry import Rect, fit_affine
from .metrics import ap_table_tsv, detections_from_json, map_50_95, truths_from_coco
from .order import PageLayout, PageType, assign_reading_order, sibling_gaps
from .pipeline import PipelineConfig, extract_page
from .qc import (
    DEFAULT_THRESHOLDS,
    MIN_CORPUS_PAGES,
    QcThresholds,
    apply_corrections,
    compute_thresholds,
    flag_corpus,
    nearest_rank,
    parse_corrections,
    parse_report,
    render_report,
)
from .raster import load_gray, save_gray
from .synth import generate_corpus

_TYPE_BY_NAME = {name: PageType(tid) for tid, name in PAGE_TYPE_NAMES.items()}


def _err(msg: str) -> None:
    print(f"tatedoc: {msg}", file=sys.stderr)


def _load_config(args) -> PipelineConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    path = getattr(args, "config", None)
    try:
        if path:
            return PipelineConfig.from_text(Path(path).read_text(), **overrides)
        return PipelineConfig(**overrides)
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _read_manifest(path: str) -> dict[str, PageType]:
    """``file_name page_type`` lines (file names must not contain spaces)."""
    mapping: dict[str, PageType] = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"manifest line {n}: expected 'file_name page_type'")
        name, type_name = parts
        if type_name not in _TYPE_BY_NAME:
            raise ParseError(
                f"manifest line {n}: unknown page type {type_name!r} "
                f"(one of {sorted(_TYPE_BY_NAME)})"
            )
        mapping[name] = _TYPE_BY_NAME[type_name]
    return mapping


def _extract_task(task):
    """One page end-to-end; crashes stay on this page (worker-safe)."""
    idx, path, type_value, config = task
    try:
        gray = load_gray(path)
        layout = extract_page(
            gray,
            config,
            page_type=PageType(type_value),
            page_id=idx,
            file_name=Path(path).name,
        )
        return idx, layout, None
    except Exception as exc:  # noqa: BLE001 — per-page isolation by contract
        return idx, None, f"{path}: {exc}"


def cmd_extract(args) -> int:
    config = _load_config(args)
    manifest = _read_manifest(args.manifest) if args.manifest else None
    paths = [Path(p) for p in args.images]
    if not paths and manifest is not None:
        base = Path(args.manifest).parent
        paths = [base / name for name in manifest]
    if not paths:
        _err("extract: no input images (positional paths or --manifest)")
        return 2

    tasks = []
    for idx, path in enumerate(paths):
        if manifest is None:
            page_type = PageType.MAIN
        else:
            page_type = manifest.get(path.name)
            if page_type is None:
                _err(f"extract: {path.name} missing from manifest, treating as other")
                page_type = PageType.OTHER
        tasks.append((idx, str(path), int(page_type), config))

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_extract_task, tasks))
    else:
        results = [_extract_task(t) for t in tasks]

    layouts: list[PageLayout] = []
    failures = 0
    for idx, layout, error in sorted(results, key=lambda r: r[0]):
        if error is not None:
            _err(f"extract: page {idx} skipped: {error}")
            failures += 1
        else:
            layouts.append(layout)

    # index pages break reading order at unusually wide gaps; "unusually"
    # is the corpus' own 99th-percentile sibling gap unless configured
    if config.index_gap_break is None:
        index_pages = [l for l in layouts if l.page_type is PageType.INDEX]
        if index_pages:
            gaps = [g for l in layouts for _, g in sibling_gaps(l)]
            if gaps:
                break_at = nearest_rank(gaps, 99)
                for i, layout in enumerate(layouts):
                    if layout.page_type is PageType.INDEX:
                        layouts[i] = assign_reading_order(layout, break_at)

    cfg = config.to_dict()
    cfg.pop("jobs")  # execution detail; output must not depend on parallelism
    info = {"tool": "tatedoc", "version": __version__, "config": cfg}
    text = to_text(to_coco(layouts, info=info))
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 3 if failures else 0


def cmd_qc_flag(args) -> int:
    layouts = layouts_from_coco(from_text(Path(args.dataset).read_text()))
    if args.thresholds == "default":
        t = DEFAULT_THRESHOLDS
    elif args.thresholds == "corpus":
        t = compute_thresholds(layouts)
    else:  # auto: corpus stats when there is enough of a corpus
        segmented = [l for l in layouts if l.elements]
        t = compute_thresholds(layouts) if len(segmented) >= MIN_CORPUS_PAGES else DEFAULT_THRESHOLDS
    report = render_report(flag_corpus(layouts, t), t)
    if args.out:
        Path(args.out).write_text(report)
    else:
        print(report, end="")
    return 0


def cmd_qc_apply(args) -> int:
    config = _load_config(args)
    layouts = layouts_from_coco(from_text(Path(args.dataset).read_text()))
    corrections = parse_corrections(Path(args.corrections).read_text())
    images = None
    if args.images:
        by_id = {l.page_id: l for l in layouts}
        image_dir = Path(args.images)

        def images(page_id: int):
            page = by_id.get(page_id)
            if page is None or not page.file_name:
                return None
            return load_gray(image_dir / page.file_name)

    fixed = apply_corrections(layouts, corrections, images=images, config=config)
    text = to_text(to_coco(fixed))
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def cmd_split(args) -> int:
    ds = from_text(Path(args.dataset).read_text())
    parts = split_dataset(ds, seed=args.seed if args.seed is not None else 0)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        (out_dir / f"{name}.json").write_text(to_text(part))
        print(f"{name}: {len(part.images)} images, {len(part.annotations)} annotations")
    return 0


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else 0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(
        args.count,
        defect_rate=args.defect_rate,
        seed=seed,
        render=True,
        rotation_range=tuple(args.rotation_range),
        hard_noise=args.noise == "hard",
    )
    for img, layout in zip(corpus.images, corpus.layouts):
        save_gray(out_dir / layout.file_name, img)
    info = {"tool": "tatedoc", "version": __version__, "generator_seed": seed}
    (out_dir / "ground_truth.json").write_text(to_text(to_coco(corpus.layouts, info=info)))
    manifest = "".join(f"{pid} {kind}\n" for pid, kind in corpus.manifest)
    (out_dir / "defects.txt").write_text(manifest)
    print(f"wrote {args.count} pages, {len(corpus.manifest)} with defects, to {out_dir}")
    return 0


def cmd_eval(args) -> int:
    truths = truths_from_coco(from_text(Path(args.truth).read_text()))
    dets = detections_from_json(Path(args.detections).read_text())
    report = map_50_95(dets, truths)
    table = ap_table_tsv(report)
    if args.out:
        Path(args.out).write_text(table)
    else:
        print(table, end="")
    print(f"mAP@[0.50:0.95] = {report['mAP']:.4f}", file=sys.stderr)
    return 0


_OVERLAY_COLORS = {
    1: (220, 40, 40),  # page frame
    2: (40, 90, 220),  # row
    3: (220, 140, 20),  # title region
    4: (30, 160, 60),  # text region
    5: (160, 40, 200),  # title
    6: (90, 180, 220),  # subtitle
    7: (120, 120, 120),  # other
}


def cmd_render(args) -> int:
    from PIL import Image, ImageDraw

    layouts = layouts_from_coco(from_text(Path(args.dataset).read_text()))
    only: set[int] | None = None
    if args.flags:
        only = {f.page_id for f in parse_report(Path(args.flags).read_text())}
    image_dir = Path(args.images)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rendered = 0
    for layout in layouts:
        if only is not None and layout.page_id not in only:
            continue
        if not layout.file_name:
            continue
        gray = load_gray(image_dir / layout.file_name)
        img = Image.fromarray(gray).convert("RGB")
        draw = ImageDraw.Draw(img)
        if layout.elements:
            frame = layout.frame()
            w, h = int(frame.rect.w), int(frame.rect.h)
            # children live in rectified-frame space; map back onto the scan
            to_scan = fit_affine(frame.quad, Rect(0, 0, w, h)).inverse()
            for el in layout.elements:
                if el.quad is not None:
                    pts = [(p.x, p.y) for p in el.quad.corners]
                else:
                    pts = [
                        (pt.x, pt.y)
                        for pt in (to_scan.apply(x, y) for x, y in el.rect.corners())
                    ]
                draw.polygon(pts, outline=_OVERLAY_COLORS.get(int(el.category), (0, 0, 0)))
        img.save(out_dir / f"overlay-{Path(layout.file_name).stem}.png")
        rendered += 1
    print(f"rendered {rendered} overlays to {out_dir}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tatedoc",
        description="Layout extraction for vertical-text document scans",
    )
    parser.add_argument("--version", action="version", version=f"tatedoc {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("extract", help="scans → hierarchical annotations (COCO JSON)")
    p.add_argument("images", nargs="*", help="scan image paths")
    p.add_argument("--manifest", help="file with 'file_name page_type' lines")
    p.add_argument("--config", help="pipeline config file (key = value lines)")
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_extract)

    qc = sub.add_parser("qc", help="statistical quality control")
    qcsub = qc.add_subparsers(dest="qc_command")
    p = qcsub.add_parser("flag", help="flag suspicious pages/gaps")
    p.add_argument("dataset", help="annotations JSON")
    p.add_argument(
        "--thresholds",
        choices=["auto", "default", "corpus"],
        default="auto",
        help="built-in defaults, corpus percentiles, or auto",
    )
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_qc_flag)
    p = qcsub.add_parser("apply", help="apply a manual corrections file")
    p.add_argument("dataset", help="annotations JSON")
    p.add_argument("--corrections", required=True, help="corrections file")
    p.add_argument("--images", help="scan directory (needed for frame corrections)")
    p.add_argument("--config", help="pipeline config for re-extraction")
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_qc_apply)

    p = sub.add_parser("split", help="train/val/test split of a dataset")
    p.add_argument("dataset", help="annotations JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate synthetic pages + ground truth")
    p.add_argument("--count", "-n", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--defect-rate", type=float, default=0.0)
    p.add_argument("--noise", choices=["none", "hard"], default="none")
    p.add_argument(
        "--rotation-range",
        nargs=2,
        type=float,
        default=(0.0, 0.0),
        metavar=("LO", "HI"),
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--truth", required=True, help="ground-truth annotations JSON")
    p.add_argument("--detections", required=True, help="COCO-results detections JSON")
    p.add_argument("--out", help="TSV table path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="overlay element boxes on scans")
    p.add_argument("dataset", help="annotations JSON")
    p.add_argument("--images", required=True, help="scan directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--flags", help="QC report; render only flagged pages")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ParseError as exc:
        _err(str(exc))
        return 2
    except OSError as exc:
        _err(str(exc))
        return 4
    except (TatedocError, ValueError) as exc:
        _err(str(exc))
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
