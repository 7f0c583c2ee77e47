"""``hbf-lab`` command line entry point."""

import argparse
import logging
import sys
from dataclasses import replace

from ..channel import channel_to_json
from ..errors import HbfError
from .experiment import load_spec, run_experiment, trial_channel


def _run(args):
    spec = load_spec(args.config)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    result = run_experiment(spec, workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        fh.write(result.to_csv())
    print(f"wrote {len(result.rows)} rows to {args.out}")


def _validate(args):
    spec = load_spec(args.config)
    print(f"ok: {spec.kind}, {len(spec.sweep)} sweep values, schemes {','.join(spec.schemes)}")


def _dump_channel(args):
    spec = load_spec(args.config)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    channels = trial_channel(spec, spec.base, args.trial)
    with open(args.out, "w") as fh:
        fh.write(channel_to_json(spec.base, channels))
    print(f"wrote channel of trial {args.trial} to {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="hbf-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=_run)

    val = sub.add_parser("validate", help="check an experiment config")
    val.add_argument("--config", required=True)
    val.set_defaults(func=_validate)

    dump = sub.add_parser("dump-channel", help="write one trial's channel as JSON")
    dump.add_argument("--config", required=True)
    dump.add_argument("--out", required=True)
    dump.add_argument("--seed", type=int)
    dump.add_argument("--trial", type=int, default=0)
    dump.set_defaults(func=_dump_channel)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        args.func(args)
    except (HbfError, OSError) as exc:
        print(f"hbf-lab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
