"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical or physics error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import DEFAULT_WINDOW, fit_thermal, kl_divergence, mean_energy
from .errors import ConfigError, OamThermalError
from .experiments import load_config, run_config
from .tables import read_spectrum, write_fit

log = logging.getLogger("oamthermal")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_KINDS = {
    "spectrum": ("spectrum",),
    "pump-sweep": ("pump-sweep",),
    "aperture-sweep": ("aperture-sweep",),
    "turbulence": ("turbulence", "coherent-turbulence", "ensemble"),
}


def _window(value: str):
    return None if value.lower() == "none" else int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oamthermal",
        description="Heralded OAM thermal-state simulator and analysis tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _KINDS:
        p = sub.add_parser(name, help=f"run a {name} experiment from a JSON config")
        p.add_argument("config", type=Path)
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides the config's output_dir)")

    p = sub.add_parser("fit", help="fit a thermal distribution to a spectrum table")
    p.add_argument("table", type=Path)
    p.add_argument("--window", type=_window, default=DEFAULT_WINDOW)
    p.add_argument("--method", default="auto",
                   choices=["auto", "poisson-mle", "least-squares", "min-kl"])
    p.add_argument("--out", type=Path, default=None, help="write the fit record here")

    p = sub.add_parser("kl", help="KL divergence D(measured || reference) between two tables")
    p.add_argument("measured", type=Path)
    p.add_argument("reference", type=Path)
    p.add_argument("--window", type=_window, default=DEFAULT_WINDOW)
    p.add_argument("--bits", action="store_true", help="report in bits instead of nats")
    return parser


def _run_experiment(args) -> int:
    config = load_config(args.config)
    allowed = _KINDS[args.command]
    if config["experiment"] not in allowed:
        raise ConfigError(
            f"config experiment {config['experiment']!r} does not match subcommand {args.command!r}")
    manifest = run_config(config, args.out)
    print(manifest.read_text(), end="")
    return 0


def _fit(args) -> int:
    spectrum = read_spectrum(args.table)
    fit = fit_thermal(spectrum, args.window, args.method)
    record = fit.to_record()
    record["mean_energy"] = mean_energy(spectrum, args.window)
    if args.out is not None:
        write_fit(args.out, fit, {"source_table": args.table.name, "window": args.window})
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def _kl(args) -> int:
    a = read_spectrum(args.measured)
    b = read_spectrum(args.reference)
    d = kl_divergence(a, b, args.window, 2.0 if args.bits else np.e)
    print(repr(d))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"fit": _fit, "kl": _kl}.get(args.command, _run_experiment)
    try:
        return handler(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OamThermalError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    except (ValueError, FloatingPointError) as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
