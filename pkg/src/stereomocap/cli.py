"""``bench`` command line: run trial matrices and render their tables."""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench

log = logging.getLogger("stereomocap.bench")


def _run(args) -> int:
    sets = bench.load_config(args.config, matrix=args.matrix, seed=args.seed)
    for name, configs in sets.items():
        log.info("running %s: %d configs", name, len(configs))
        csv_path, json_path = bench.run_matrix(
            configs, args.out, name=name, jobs=args.jobs, dump_frames=args.dump_frames, timing=args.timing
        )
        print(f"{name}: wrote {csv_path} and {json_path}")
    return 0


def _report(args) -> int:
    sys.stdout.write(bench.render_report(args.input, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Simulated stereo marker-tracking benchmark.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run trial matrices and write CSV/JSON results")
    r.add_argument("--config", help="JSON run config (defaults used when omitted)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--matrix", choices=bench.MATRIX_NAMES)
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--dump-frames", action="store_true", help="write the first frame pair of each trial as PGM")
    r.add_argument("--timing", action="store_true", help="also write wall-clock timings (non-deterministic)")
    r.set_defaults(func=_run)

    rep = sub.add_parser("report", help="render results from a run directory")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--format", choices=("csv", "markdown"), default="csv")
    rep.set_defaults(func=_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
