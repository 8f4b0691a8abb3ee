"""Command-line entry point.

Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure
(singular or non-PSD matrices), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, profiles
from .detect import DEFAULT_BOOTSTRAPS, DEFAULT_PFA, DetectConfig, detect
from .errors import InvalidInput, NumericalError
from .model import load_profile, save_profile, truth_map
from .oracle import check_theorem1
from .rng import DEFAULT_SEED, RngStream
from .synth import GenConfig, generate, load_dataset, save_dataset

log = logging.getLogger("corrmap")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _profile_arg(args):
    if getattr(args, "builtin", None):
        if args.builtin not in profiles.BUILTIN:
            raise InvalidInput(f"unknown builtin profile {args.builtin!r}; choose from {sorted(profiles.BUILTIN)}")
        return profiles.BUILTIN[args.builtin]()
    if not args.profile:
        raise InvalidInput("give --profile FILE or --builtin NAME")
    return load_profile(args.profile)


def cmd_gen(args) -> int:
    profile = _profile_arg(args)
    log.info("gen: seed=%d snr=%g dB M=%d", args.seed, args.snr, args.samples)
    cfg = GenConfig(profile, args.snr, args.samples, seed=args.seed, mixing=args.mixing)
    data = generate(cfg, RngStream(args.seed))
    out = save_dataset(data, args.out, seed=args.seed, snr_db=args.snr)
    print(str(out))
    return EXIT_OK


def cmd_detect(args) -> int:
    data = load_dataset(args.data)
    cfg = DetectConfig(bootstraps=args.bootstraps, pfa=args.pfa, seed=args.seed,
                       shared_resamples=not args.independent_resamples)
    log.info("detect: seed=%d B=%d pfa=%g", cfg.seed, cfg.bootstraps, cfg.pfa)
    report = detect(data, cfg)
    doc = report.to_dict()
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.dump_spectrum:
        lines = ["rank,value"] + [f"{k + 1},{v:.17g}" for k, v in enumerate(report.eigenvalues)]
        Path(args.dump_spectrum).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for diag in report.diagnostics:
        log.warning("%s: %s", diag["kind"], diag["message"])
    return EXIT_OK


def cmd_oracle(args) -> int:
    profile = _profile_arg(args)
    rng = RngStream(args.seed)
    if args.mixing == "orthogonal":
        log.info("oracle: seed=%d", args.seed)
    report = check_theorem1(profile, mixing=args.mixing, rng=rng)
    sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_mc(args) -> int:
    if args.scenario:
        cfg = harness.load_scenario(args.scenario)
    elif args.builtin:
        cfg = harness.builtin_scenario(args.builtin)
    else:
        raise InvalidInput("give --scenario FILE or --builtin NAME")
    if args.full_scale:
        cfg = cfg.full_scale()
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.bootstraps is not None:
        cfg = replace(cfg, detect=replace(cfg.detect, bootstraps=args.bootstraps))
    seed = cfg.detect.seed if args.seed is None else args.seed
    log.info("mc: %s seed=%d trials=%d B=%d", cfg.name, seed, cfg.trials, cfg.detect.bootstraps)

    def progress(snr, done, total):
        log.info("sweep point %d/%d done (snr=%g)", done, total, snr)

    records = harness.run_scenario(cfg, seed=seed, workers=args.workers, progress=progress)
    out = harness.emit_outputs(cfg, records, args.out_dir, seed)
    sys.stdout.write(harness.records_csv(records))
    log.info("outputs written to %s", out)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    if args.matrix:
        values = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    elif args.profile or args.builtin:
        values = truth_map(_profile_arg(args))
    else:
        raise InvalidInput("give --matrix FILE, --profile FILE or --builtin NAME")
    harness.emit_heatmap(values, args.out, title=args.title)
    print(args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    profile = _profile_arg(args)
    if args.out:
        save_profile(profile, args.out)
    else:
        from .model import profile_to_dict

        sys.stdout.write(json.dumps(profile_to_dict(profile), indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="corrmap", description="Detect which components are correlated across which data sets.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS,
                        help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add_profile_args(sp):
        sp.add_argument("--profile", help="profile JSON file")
        sp.add_argument("--builtin", help=f"built-in profile: {', '.join(sorted(profiles.BUILTIN))}")

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset directory")
    add_profile_args(g)
    g.add_argument("--snr", type=float, required=True, help="SNR in dB (inf for noiseless)")
    g.add_argument("--samples", type=int, required=True, help="number of joint samples M")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default {DEFAULT_SEED}")
    g.add_argument("--mixing", choices=["orthogonal", "gaussian"], default="orthogonal")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("detect", parents=[common], help="estimate d and the correlation map of a dataset")
    d.add_argument("--data", required=True, help="dataset directory written by gen")
    d.add_argument("--bootstraps", type=int, default=DEFAULT_BOOTSTRAPS, help=f"default {DEFAULT_BOOTSTRAPS}")
    d.add_argument("--pfa", type=float, default=DEFAULT_PFA, help=f"default {DEFAULT_PFA}")
    d.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default {DEFAULT_SEED}")
    d.add_argument("--independent-resamples", action="store_true",
                   help="use a separate bootstrap stream for the structure test")
    d.add_argument("--out", help="report JSON path (default stdout)")
    d.add_argument("--dump-spectrum", metavar="CSV", help="write sample coherence eigenvalues (rank,value)")
    d.set_defaults(func=cmd_detect)

    o = sub.add_parser("oracle", parents=[common], help="population eigenvalue check for a profile")
    add_profile_args(o)
    o.add_argument("--mixing", choices=["identity", "orthogonal"], default="identity")
    o.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default {DEFAULT_SEED}")
    o.set_defaults(func=cmd_oracle)

    m = sub.add_parser("mc", parents=[common], help="Monte Carlo sweep")
    m.add_argument("--scenario", help="scenario config JSON")
    m.add_argument("--builtin", choices=["i", "ii", "iii", "iv", "null"], help="built-in desk-scale scenario")
    m.add_argument("--trials", type=int, help="override trial count (desk default 50)")
    m.add_argument("--bootstraps", type=int, help="override bootstrap count (desk default 500)")
    m.add_argument("--full-scale", action="store_true",
                   help="500 trials, B=1000, SNR -10..14 dB (slow)")
    m.add_argument("--seed", type=int, help="master seed (default: scenario's detect seed)")
    m.add_argument("--workers", type=int, default=1, help="parallel processes")
    m.add_argument("--out-dir", required=True)
    m.set_defaults(func=cmd_mc)

    h = sub.add_parser("heatmap", parents=[common], help="render a cell matrix or a profile's truth map as SVG")
    h.add_argument("--matrix", help="CSV matrix with values in [0, 1]")
    add_profile_args(h)
    h.add_argument("--title")
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_heatmap)

    pr = sub.add_parser("profile", parents=[common], help="write a built-in profile as JSON")
    add_profile_args(pr)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_profile)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"corrmap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"corrmap: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"corrmap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"corrmap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
