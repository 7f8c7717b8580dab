"""Command-line entry point: ``noon-ocm {run,preset,fit,coincidences}``.

Exit codes: 0 success, 2 invalid configuration or input, 3 runtime failure.
``NOON_OCM_OUTPUT_DIR`` overrides the output directory of ``run``/``preset``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io
from ._backend import BACKEND
from .coincidence import extract_coincidences
from .config import PRESETS, ConfigError, load_config, load_preset
from .fit import FitError, fit_fringe
from .pipeline import PipelineError, run_pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
OUTPUT_ENV = "NOON_OCM_OUTPUT_DIR"

log = logging.getLogger("noon_ocm")


def _pipeline(cfg):
    bundle = run_pipeline(cfg)
    print(f"wrote {bundle.directory}")
    if bundle.scaling is not None:
        print(bundle.scaling.to_text(), end="")
    return EXIT_OK


def cmd_run(args):
    return _pipeline(load_config(args.config, output_dir=args.output or os.environ.get(OUTPUT_ENV)))


def cmd_preset(args):
    return _pipeline(load_preset(args.name, output_dir=args.output or os.environ.get(OUTPUT_ENV)))


def cmd_fit(args):
    try:
        hist = io.read_histogram(args.histogram)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(args.histogram), str(exc)) from None
    fit = fit_fringe(hist, k_constraint=args.k, k_guess=args.k_guess)
    text = fit.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_coincidences(args):
    try:
        records = list(io.read_pulses(args.pulses))
    except (OSError, ValueError) as exc:
        raise ConfigError(str(args.pulses), str(exc)) from None
    try:
        events, counter = extract_coincidences(records, args.channels, args.order)
    except ValueError as exc:
        raise ConfigError(str(args.pulses), str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_count_table(out / "counts.tsv", counter)
    io.write_events(out / "events.tsv", events)
    folds = "".join(f"fold_{k} = {int(v)}\n" for k, v in enumerate(counter.kfold))
    singles = "".join(f"singles_{c} = {int(v)}\n" for c, v in enumerate(counter.singles))
    (out / "folds.txt").write_text(f"pulses = {counter.n_pulses}\n" + folds + singles)
    print(f"{len(events)} {args.order}-fold events from {counter.n_pulses} pulses -> {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="noon-ocm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a YAML experiment config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides config and env)")
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("preset", help="run a bundled figure reproduction")
    pr.add_argument("name", choices=PRESETS)
    pr.add_argument("-o", "--output")
    pr.set_defaults(func=cmd_preset)

    f = sub.add_parser("fit", help="fit an envelope-sinusoid to a histogram file")
    f.add_argument("histogram")
    g = f.add_mutually_exclusive_group()
    g.add_argument("--k", type=float, help="fixed angular frequency (rad per coordinate unit)")
    g.add_argument("--k-guess", type=float, help="starting frequency for a free fit")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("coincidences", help="count coincidences in a pulse-stream file")
    c.add_argument("pulses")
    c.add_argument("--channels", type=int, default=11)
    c.add_argument("--order", type=int, required=True)
    c.add_argument("--out", default="coincidences")
    c.set_defaults(func=cmd_coincidences)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineError, FitError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
