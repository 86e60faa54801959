"""Command-line interface.

One executable, subcommand per pipeline stage:

  synth     render a synthetic cross-sensor corpus
  extract   compute one descriptor for one image
  train     fit the fusion model on a gallery directory
  enroll    add a template to a database
  verify    score a probe against an enrolled subject
  evaluate  run a gallery/probe protocol and write reports
  inspect   dump preprocessing and orientation diagnostics

Exit codes: 0 success, 1 domain error (or a verify rejection when
--threshold is given), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, binio, evaluation, fusion, matcher, orientation, pipeline, preprocess, synth
from .config import PipelineConfig, apply_overrides, parse_config
from .coror import build_coror
from .errors import CrossFpError
from .gaborhog import build_gabor_hog, cached_bank


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="pipeline config file")
    sub.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        dest="overrides",
        help="override one config key (repeatable; wins over --config)",
    )


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = parse_config(args.config) if args.config else PipelineConfig()
    return apply_overrides(config, args.overrides)


def _print_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload) + "\n")


def cmd_synth(args: argparse.Namespace) -> int:
    written = synth.generate_synthetic_corpus(
        args.out,
        n_fingers=args.fingers,
        impressions_per_sensor=args.impressions,
        seed=args.seed,
    )
    _print_json({"images": len(written), "out": str(args.out)})
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    config = _load_config(args)
    img = preprocess.load_image(args.image)
    out = Path(args.out) if args.out else Path(str(args.image) + f".{args.kind}.desc")
    if args.kind == "coror":
        pair_cfg = config.coror
        pp, oc = config.preprocessing, config.orientation
        normalized = preprocess.normalize(img, pp.target_mean, pp.target_variance)
        mask = preprocess.segment(normalized, pp.seg_block, pp.seg_threshold)
        field = orientation.estimate_orientation_field(normalized, oc.window)
        field = orientation.smooth_orientation_field(field, oc.sigma)
        field = orientation.merge_mask(field, mask)
        dominant = orientation.dominant_orientation(field)
        levels = orientation.quantize_field(orientation.align_field(field, dominant))
        descriptor = build_coror(levels, pair_cfg.offsets, pair_cfg.directions)
        binio.save_descriptor(
            out,
            descriptor.values,
            "coror",
            {"offsets": list(pair_cfg.offsets), "directions": list(pair_cfg.directions)},
        )
    else:
        pp, gc = config.preprocessing, config.gabor
        normalized = preprocess.normalize(img, pp.target_mean, pp.target_variance)
        descriptor = build_gabor_hog(normalized, cached_bank(tuple(gc.wavelengths)), gc.bins)
        binio.save_descriptor(
            out,
            descriptor.values,
            "gaborhog",
            {"wavelengths": list(gc.wavelengths), "bins": gc.bins},
        )
    _print_json({"out": str(out), "kind": args.kind, "length": int(descriptor.values.size)})
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    images = evaluation.scan_dataset(args.gallery)
    pairs = pipeline.extract_many([img.path for img in images], config)
    pair_set = fusion.DescriptorPairSet(
        x=np.stack([p.coror for p in pairs], axis=1),
        y=np.stack([p.gaborhog for p in pairs], axis=1),
        sample_ids=tuple(img.path.name for img in images),
    )
    model = fusion.fit_cca(
        pair_set,
        epsilon=config.cca.epsilon,
        max_k=config.cca.max_k,
        fusion_mode=config.cca.fusion_mode,
        variance_keep=config.cca.variance_keep,
    )
    fusion.save_model(model, args.out)
    _print_json(
        {
            "out": str(args.out),
            "samples": pair_set.n,
            "k": model.k,
            "top_correlation": float(model.lambdas[0]),
            "model_hash": fusion.model_hash(model),
        }
    )
    return 0


def cmd_enroll(args: argparse.Namespace) -> int:
    config = _load_config(args)
    model = fusion.load_model(args.model)
    db_path = Path(args.db)
    existing = db_path.exists()
    db = matcher.TemplateDB.load(db_path) if existing else matcher.TemplateDB(fusion.model_hash(model))
    img = preprocess.load_image(args.image)
    record = matcher.enroll(img, args.id, model, db, config, finger_id=args.finger)
    if existing:
        db.append_to(db_path, record)
    else:
        db.save(db_path)
    _print_json({"db": str(db_path), "subject": args.id, "templates": len(db.records_for(args.id))})
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    config = _load_config(args)
    model = fusion.load_model(args.model)
    db = matcher.TemplateDB.load(args.db)
    img = preprocess.load_image(args.image)
    result = matcher.match(img, args.id, model, db, config)
    if args.threshold is None:
        _print_json({"score": result.score, "decision": None})
        return 0
    decision = matcher.verify(result, args.threshold)
    _print_json({"score": result.score, "decision": decision})
    return 0 if decision == "accept" else 1


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    model = fusion.load_model(args.model)
    scores = evaluation.run_protocol(
        args.gallery,
        args.probe,
        model,
        config,
        impostor_cap=args.impostor_cap,
        seed=args.seed,
    )
    metrics = evaluation.compute_metrics(scores)
    written = evaluation.emit_report(metrics, scores, args.out)
    _print_json(
        {
            "eer": metrics.eer,
            "fmr100": metrics.fmr100,
            "fmr1000": metrics.fmr1000,
            "zero_fmr": metrics.zero_fmr,
            "n_genuine": metrics.n_genuine,
            "n_impostor": metrics.n_impostor,
            "files": [str(p) for p in written],
        }
    )
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    config = _load_config(args)
    img = preprocess.load_image(args.image)
    pp, oc = config.preprocessing, config.orientation
    normalized = preprocess.normalize(img, pp.target_mean, pp.target_variance)
    mask = preprocess.segment(normalized, pp.seg_block, pp.seg_threshold)
    field = orientation.estimate_orientation_field(normalized, oc.window)
    field = orientation.smooth_orientation_field(field, oc.sigma)
    field = orientation.merge_mask(field, mask)
    dominant = orientation.dominant_orientation(field)

    if args.field_csv:
        with open(args.field_csv, "w", encoding="utf-8") as fh:
            fh.write("row,col,theta_degrees,valid\n")
            degrees = np.degrees(field.angles)
            for r in range(field.shape[0]):
                for c in range(field.shape[1]):
                    fh.write(f"{r},{c},{degrees[r, c]:.6f},{int(field.valid[r, c])}\n")
    if args.mask_pgm:
        preprocess.write_mask_pgm(mask, args.mask_pgm)

    _print_json(
        {
            "width": img.width,
            "height": img.height,
            "foreground_coverage": mask.coverage,
            "valid_pixels": field.count_valid(),
            "dominant_orientation_deg": float(np.degrees(dominant)),
        }
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossfp",
        description="Cross-sensor fingerprint verification pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sub = subparsers.add_parser("synth", help="generate a synthetic corpus")
    sub.add_argument("--out", required=True, help="output dataset directory")
    sub.add_argument("--fingers", type=int, required=True, help="number of synthetic fingers")
    sub.add_argument("--impressions", type=int, default=2, help="impressions per sensor")
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=cmd_synth)

    sub = subparsers.add_parser("extract", help="extract one descriptor")
    sub.add_argument("--kind", choices=("coror", "gaborhog"), required=True)
    sub.add_argument("--out", help="descriptor output path (default IMG.<kind>.desc)")
    _add_config_flags(sub)
    sub.add_argument("image", metavar="IMG")
    sub.set_defaults(func=cmd_extract)

    sub = subparsers.add_parser("train", help="fit the fusion model on a gallery")
    sub.add_argument("--gallery", required=True, metavar="DIR")
    sub.add_argument("--out", required=True, metavar="MODEL")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_train)

    sub = subparsers.add_parser("enroll", help="add a template to a database")
    sub.add_argument("--db", required=True, metavar="PATH")
    sub.add_argument("--model", required=True, metavar="PATH")
    sub.add_argument("--id", required=True, metavar="ID", help="subject identifier")
    sub.add_argument("--finger", metavar="ID", help="optional finger identifier")
    _add_config_flags(sub)
    sub.add_argument("image", metavar="IMG")
    sub.set_defaults(func=cmd_enroll)

    sub = subparsers.add_parser("verify", help="match a probe against a subject")
    sub.add_argument("--db", required=True, metavar="PATH")
    sub.add_argument("--model", required=True, metavar="PATH")
    sub.add_argument("--id", required=True, metavar="ID")
    sub.add_argument("--threshold", type=float, help="accept iff score <= threshold")
    _add_config_flags(sub)
    sub.add_argument("image", metavar="IMG")
    sub.set_defaults(func=cmd_verify)

    sub = subparsers.add_parser("evaluate", help="run a verification protocol")
    sub.add_argument("--gallery", required=True, metavar="DIR")
    sub.add_argument("--probe", required=True, metavar="DIR")
    sub.add_argument("--model", required=True, metavar="PATH")
    sub.add_argument("--out", required=True, metavar="DIR")
    sub.add_argument("--impostor-cap", type=int, default=None)
    sub.add_argument("--seed", type=int, default=0)
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_evaluate)

    sub = subparsers.add_parser("inspect", help="preprocessing diagnostics for one image")
    sub.add_argument("--field-csv", metavar="PATH", help="write the orientation field as CSV")
    sub.add_argument("--mask-pgm", metavar="PATH", help="write the foreground mask as PGM")
    _add_config_flags(sub)
    sub.add_argument("image", metavar="IMG")
    sub.set_defaults(func=cmd_inspect)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except CrossFpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
