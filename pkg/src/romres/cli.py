"""Command-line front end for the experiment scenarios.

Verbs map onto named scenarios; flags mirror the ExperimentConfig fields
and a JSON config file (--config) overrides any flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .errors import RomresError
from .scenarios import SCENARIOS, ExperimentConfig, run_scenario

_VERBS = {
    "synthesize": "synthesize",
    "invert1d": "invert1d",
    "invert2d": "2d-tilted",
    "grids": "fig-grids",
    "condnum": "condnum",
    "sensmap": "sensmap",
}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; overrides flags")
    p.add_argument("--phantom")
    p.add_argument("--n-fine", type=int)
    p.add_argument("--n-coarse", type=int)
    p.add_argument("--fine-shape", type=int, nargs=2, metavar=("NX", "NY"))
    p.add_argument("--coarse-shape", type=int, nargs=2, metavar=("NX", "NY"))
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--h-T", type=float, dest="h_T")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--m0", type=int)
    p.add_argument("--family")
    p.add_argument("--s-hat", type=float)
    p.add_argument("--ratio", type=float, help="alias for --s-hat on 1D families")
    p.add_argument("--n-gn", type=int)
    p.add_argument("--n-sources", type=int)
    p.add_argument("--weights", choices=["identity", "adaptive"])
    p.add_argument("--parametrization", choices=["cfrac", "spectral"])
    p.add_argument("--no-nullspace", action="store_true",
                   help="skip the null-space regularization step")
    p.add_argument("--save-models", action="store_true")
    p.add_argument("--outdir")


def _build_config(scenario: str, args: argparse.Namespace) -> ExperimentConfig:
    values = {"scenario": scenario}
    mapping = {
        "phantom": "phantom", "n_fine": "n_fine", "n_coarse": "n_coarse",
        "fine_shape": "fine_shape", "coarse_shape": "coarse_shape",
        "T": "T", "h_T": "h_T", "epsilon": "epsilon", "seed": "seed",
        "m0": "m0", "family": "family", "s_hat": "s_hat", "n_gn": "n_gn",
        "n_sources": "n_sources", "weights": "weights",
        "parametrization": "parametrization", "save_models": "save_models",
        "outdir": "outdir",
    }
    for attr, key in mapping.items():
        v = getattr(args, attr, None)
        if v is not None and v is not False:
            values[key] = tuple(v) if isinstance(v, list) else v
    if getattr(args, "ratio", None) is not None:
        values["s_hat"] = args.ratio
    if getattr(args, "no_nullspace", False):
        values["nullspace_correction"] = False
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_conf = json.load(fh)
        known = {f.name for f in fields(ExperimentConfig)}
        for k, v in file_conf.items():
            if k not in known:
                raise RomresError(f"unknown config key {k!r}")
            values[k] = tuple(v) if isinstance(v, list) else v
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="romres",
        description="Resistivity inversion experiments via reduced-order models")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _VERBS:
        p = sub.add_parser(verb, help=f"run the {_VERBS[verb]} scenario")
        _add_config_flags(p)
    p = sub.add_parser("scenario", help="run a named scenario")
    p.add_argument("name", choices=sorted(SCENARIOS))
    _add_config_flags(p)

    args = parser.parse_args(argv)
    scenario = args.name if args.verb == "scenario" else _VERBS[args.verb]
    try:
        cfg = _build_config(scenario, args)
        outputs = run_scenario(cfg)
    except RomresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
