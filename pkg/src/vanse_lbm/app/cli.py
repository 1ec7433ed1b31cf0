"""Command line entry point: ``run`` a single resolution or ``converge`` over several."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError, NumericalBreakdown
from ..mms import CASES
from .simulation import INIT_MODES, RunConfig, run_convergence, run_single

EXIT_OK, EXIT_USAGE, EXIT_BREAKDOWN = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolutions(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    # defaults are None so that config-file values survive unless overridden
    p.add_argument("--case", choices=sorted(CASES))
    p.add_argument("--tabulated", metavar="FILE", help="tabulated custom case instead of --case")
    p.add_argument("--config", metavar="FILE", help="YAML or JSON file with RunConfig fields")
    p.add_argument("--tau", type=float)
    p.add_argument("--scheme", choices=("consistent", "legacy"))
    p.add_argument("--quadrature-dims", type=int, choices=(1, 2, 3))
    p.add_argument("--as-printed", action="store_true", default=None,
                   help="use the transient 3D fields verbatim (phi without time argument)")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--snapshots", type=int, metavar="K", help="write a snapshot every K steps")
    p.add_argument("--snapshot-format", choices=("csv", "vtk", "both"))
    p.add_argument("--workers", type=int, help="threads per step (0 = all cores)")
    p.add_argument("--steady-window", type=int, metavar="STEPS")
    p.add_argument("--steady-tol", type=float)
    p.add_argument("--max-time", type=float, help="cap on simulated seconds for stationary cases")
    p.add_argument("--t-end", type=float, help="evaluation time for transient cases")
    p.add_argument("--init", choices=INIT_MODES,
                   help="prepared (default): consistent moments plus a divergence correction; "
                        "consistent: moments only; local: equilibrium of the local phi")
    p.add_argument("--init-pressure", action="store_true", default=None,
                   help="initialise the density from the analytic pressure")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vanse-lbm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="simulate one resolution")
    _common(run)
    run.add_argument("--n", type=int)
    conv = sub.add_parser("converge", help="grid convergence study")
    _common(conv)
    conv.add_argument("--resolutions", type=_resolutions)
    conv.add_argument("--parallel", action="store_true", default=None,
                      help="run resolutions in separate processes")
    return parser


def load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    return data


def make_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for k, v in vars(args).items():
        if k in known and v is not None:
            values[k] = v
    if "case" in values and values["case"] not in CASES:
        raise ConfigurationError(f"unknown case {values['case']!r}")
    return RunConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = make_config(args)
        if args.command == "run":
            report = run_single(cfg)
            for case, n, q, norm, value in report.rows():
                print(f"{case} n={n} {q:<8} {norm:<4} {value:.6e}")
            return EXIT_OK
        table = run_convergence(cfg)
        print(table.format())
        if any(r.status != "ok" for r in table.reports):
            return EXIT_BREAKDOWN
        return EXIT_OK
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalBreakdown as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
