"""Command-line front end: generate / verify / stats / inspect / caraug."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .augment import PRESETS, AugmentConfig
from .caraug import DEFAULT_ANGLE_BOUND_DEG, run_caraug
from .patchgrid import default_catalog, save_catalog
from .pipeline import PipelineConfig, generate, stats, verify
from .records import read_record_at, read_shard_header, write_ppm


def _add_generate(sub):
    p = sub.add_parser("generate", help="materialize shards from an image corpus")
    p.add_argument("--input", required=True, help="corpus directory")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--catalog", default=None, help="configuration catalog file (default: built-in)")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--preset", choices=sorted(PRESETS), default="full",
                   help="named ablation preset to start from")
    p.add_argument("--rotations", type=int, choices=(0, 2, 4), default=None,
                   help="rotation classes: 0 disables, 2 adds 180, 4 adds 90/270")
    p.add_argument("--no-ra", action="store_true", help="disable the random aperture")
    p.add_argument("--no-ubt", action="store_true", help="disable mirror/zoom/crop")
    p.add_argument("--no-rrm", action="store_true", help="disable resample-method mixing")
    p.add_argument("--no-cb", action="store_true", help="disable chroma blurring")
    p.add_argument("--no-yj", action="store_true", help="unyoked crop jitter")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--shard-records", type=int, default=65536)
    p.add_argument("--holdout-fraction", type=float, default=0.0,
                   help="fraction of images held out into separate shards")
    p.set_defaults(func=_cmd_generate)


def _augment_from_args(args) -> AugmentConfig:
    aug = PRESETS[args.preset]
    overrides = {}
    if args.rotations is not None:
        overrides["rotations"] = args.rotations if args.rotations else 1
    if args.no_ra:
        overrides["enable_ra"] = False
    if args.no_ubt:
        overrides["enable_ubt"] = False
    if args.no_rrm:
        overrides["enable_rrm"] = False
    if args.no_cb:
        overrides["enable_cb"] = False
    if args.no_yj:
        overrides["enable_yj"] = False
    return dataclasses.replace(aug, **overrides) if overrides else aug


def _cmd_generate(args) -> int:
    config = PipelineConfig(
        input_dir=args.input,
        output_dir=args.output,
        seed=args.seed,
        catalog_path=args.catalog,
        augment=_augment_from_args(args),
        epochs=args.epochs,
        shard_records=args.shard_records,
        workers=args.workers,
        holdout_fraction=args.holdout_fraction,
    )
    manifest_path = generate(config)
    print(manifest_path)
    return 0


def _cmd_verify(args) -> int:
    report = verify(args.manifest)
    for problem in report.problems:
        print(f"FAIL {problem}")
    print(f"{'PASS' if report.ok else 'FAIL'}: {report.records_checked} records checked")
    return 0 if report.ok else 1


def _cmd_stats(args) -> int:
    config = PipelineConfig(
        input_dir=args.input, output_dir=".", seed=0, epochs=args.epochs
    )
    print(json.dumps(stats(config), indent=2))
    return 0


def _cmd_inspect(args) -> int:
    header = read_shard_header(args.shard)
    print(
        f"format v{header.format_version}, {header.record_count} records, "
        f"{header.class_count} classes"
    )
    if args.index is not None:
        rec = read_record_at(args.shard, args.index)
        print(
            f"record {args.index}: class {rec.class_id}, config {rec.config_id}, "
            f"rot {rec.rot_index}, flags 0x{rec.flags:02x}"
        )
        if args.dump_ppm:
            for i, patch in enumerate(rec.patches, start=1):
                path = f"{args.dump_ppm}_p{i}.ppm"
                write_ppm(path, patch)
                print(path)
    return 0


def _cmd_caraug(args) -> int:
    count = run_caraug(args.input, args.output, args.seed, args.angle_bound)
    print(f"augmented {count} images x 24 variants")
    return 0


def _cmd_catalog(args) -> int:
    save_catalog(default_catalog(), args.out)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchforge",
        description="Deterministic patch-set sample generation for context pretraining.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_generate(sub)

    p = sub.add_parser("verify", help="re-hash shards and validate every record")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("stats", help="dry-run record and byte arithmetic")
    p.add_argument("--input", required=True)
    p.add_argument("--epochs", type=int, default=1)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("inspect", help="peek at a shard or dump one record")
    p.add_argument("shard")
    p.add_argument("--index", type=int, default=None)
    p.add_argument("--dump-ppm", default=None, metavar="PREFIX",
                   help="write the record's three patches as PREFIX_p[123].ppm")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("caraug", help="24-variant hue/perspective augmentation")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--angle-bound", type=float, default=DEFAULT_ANGLE_BOUND_DEG,
                   help="Euler angle perturbation bound in degrees")
    p.set_defaults(func=_cmd_caraug)

    p = sub.add_parser("catalog", help="write the built-in catalog for editing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_catalog)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
