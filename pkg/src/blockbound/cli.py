"""Command-line interface: ``blockbound {bound,simulate,coverage,cv,blocklength}``.

Options may also come from a flat ``key = value`` config file (``--config``);
command-line flags override the file, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path
from typing import Optional, TextIO

from . import __version__
from .bootstrap import block_length, gen_error_bound
from .core import (
    DegenerateDesignError,
    InputError,
    RngStream,
    Series,
    SpecError,
)
from .crossval import cv_normality_samples, kfold_cv_risk
from .dgp import (
    DEFAULT_BURNIN,
    PRESET_D,
    ArArchSpec,
    ArmaSpec,
    DgpSpec,
    preset,
    simulate,
)
from .harness import (
    CONTINUATION,
    COVERAGE_COLUMNS,
    DEFAULT_HORIZON,
    INDEPENDENT,
    coverage_sweep,
    qq_data,
)

log = logging.getLogger("blockbound")

SEED_ENV = "BLOCKBOUND_SEED"
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
DEFAULT_SIZES = (50, 145, 240, 335, 430, 525, 620, 715, 810, 905, 1000)

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "burnin": DEFAULT_BURNIN,
    "B": 500,
    "alpha": [0.1],
    "ell": "auto",
    "n": 1000,
    "noise_sd": 1.0,
    "omega": 1.0,
    "k": 5,
    "n_runs": 2000,
    "n_outer": 500,
    "sizes": list(DEFAULT_SIZES),
    "horizon": DEFAULT_HORIZON,
    "oracle": CONTINUATION,
}


def fmt(x: float) -> str:
    """Round-trip exact decimal form used in every CSV."""
    return format(float(x), ".17g")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _ell(text: str):
    if text == "auto":
        return "auto"
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"block length must be 'auto' or an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("block length must be >= 1")
    return v


def read_series(path: str) -> Series:
    """Read one number per line; ``#`` lines and blanks are skipped, a leading header is allowed."""
    values = []
    seen_data = False
    try:
        fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                values.append(float(s))
            except ValueError:
                if not seen_data:
                    seen_data = True  # header line
                    continue
                raise InputError(f"{path}:{lineno}: not a number: {s!r}")
            seen_data = True
    if not values:
        raise InputError(f"{path}: no numeric values")
    return Series(values)


def write_series(series: Series, out: TextIO, header: dict) -> None:
    for key, value in header.items():
        out.write(f"# {key}: {value}\n")
    for v in series.values:
        out.write(fmt(v) + "\n")


def read_config(path: str) -> dict[str, str]:
    cfg = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in s.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file supplying defaults")
    p.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, help="worker processes (default 1)")
    p.add_argument("-o", "--output", help="output path (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true", default=None)


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data source")
    g.add_argument("--input", help="series file, one value per line ('-' for stdin)")
    _add_dgp(g)
    g.add_argument("--n", type=int, help="simulated series length (default 1000)")


def _add_dgp(g) -> None:
    g.add_argument("--dgp", choices=sorted(PRESET_D), help="data-generating process")
    g.add_argument("--phi", type=_floats, help="ARMA AR coefficients, comma-separated")
    g.add_argument("--theta", type=_floats, help="ARMA MA coefficients, comma-separated")
    g.add_argument("--noise-sd", dest="noise_sd", type=float, help="ARMA noise sd (default 1)")
    g.add_argument("--phi1", type=float, help="AR-ARCH AR coefficient (default 0.8)")
    g.add_argument("--omega", type=float, help="AR-ARCH constant (default 1)")
    g.add_argument("--alpha1", type=float, help="AR-ARCH ARCH coefficient (default 0.99)")
    g.add_argument("--burnin", type=int, help="discarded initial steps (default 1000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockbound",
        description="Circular block bootstrap bounds on time-series forecasting risk.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="bootstrap upper bound on the risk of an AR(d-1) fit")
    _add_common(p)
    _add_source(p)
    p.add_argument("--d", type=int, help="embedding dimension (AR order + 1); required")
    p.add_argument("--B", type=int, help="bootstrap replicates (default 500)")
    p.add_argument("--alpha", type=_floats, help="1 - confidence level (default 0.1)")
    p.add_argument("--ell", type=_ell, help="block length or 'auto' (default auto)")
    p.add_argument("--eta-output", dest="eta_output", help="CSV of bootstrap draws (default <output>_eta.csv)")

    p = sub.add_parser("simulate", help="write a simulated series, one value per line")
    _add_common(p)
    _add_dgp(p)
    p.add_argument("--n", type=int, help="series length (default 1000)")

    p = sub.add_parser("coverage", help="coverage of the bound over repeated realisations")
    _add_common(p)
    _add_dgp(p)
    p.add_argument("--d", type=int, help="embedding dimension (default: the process's usual model order + 1)")
    p.add_argument("--sizes", type=_ints, help="comma-separated sample sizes (default 11 sizes 50..1000)")
    p.add_argument("--n-outer", dest="n_outer", type=int, help="realisations per size (default 500)")
    p.add_argument("--B", type=int, help="bootstrap replicates (default 500)")
    p.add_argument("--alpha", type=_floats, help="comma-separated alphas (default 0.1)")
    p.add_argument("--ell", type=_ell, help="block length or 'auto' (default auto)")
    p.add_argument("--horizon", type=int, help="oracle risk horizon (default 1000)")
    p.add_argument("--oracle", choices=[CONTINUATION, INDEPENDENT], help="oracle risk path (default continuation)")

    p = sub.add_parser("cv", help="k-fold cross-validated risk, or Q-Q data of its distribution")
    _add_common(p)
    _add_source(p)
    p.add_argument("--d", type=int, help="embedding dimension (default 3, an AR(2) model)")
    p.add_argument("--k", type=int, help="number of folds (default 5)")
    p.add_argument("--normality", action="store_true", default=None, help="emit Q-Q CSV over many simulated runs")
    p.add_argument("--n-runs", dest="n_runs", type=int, help="runs for --normality (default 2000)")

    p = sub.add_parser("blocklength", help="print the automatic block length")
    _add_common(p)
    _add_source(p)
    return parser


class UsageError(Exception):
    pass


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def resolve(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv`` and fill unset options from the config file, env and defaults."""
    args = parser.parse_args(argv)
    sp = _subparser(parser, args.command)
    by_dest = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    if args.config:
        for key, raw in read_config(args.config).items():
            if key not in by_dest:
                raise UsageError(f"unknown config key {key!r} for '{args.command}'")
            if getattr(args, key) is not None:
                continue
            action = by_dest[key]
            if action.nargs == 0:
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    value = action.type(raw) if action.type else raw
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"config key {key!r}: {exc}")
                if action.choices is not None and value not in action.choices:
                    raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
            setattr(args, key, value)
    if args.seed is None and os.environ.get(SEED_ENV):
        try:
            args.seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer")
    for dest in by_dest:
        if getattr(args, dest, None) is None and dest in DEFAULTS:
            setattr(args, dest, DEFAULTS[dest])
    if not 0 <= args.seed < 2**64:
        raise UsageError("seed must be a non-negative 64-bit integer")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def dgp_from_args(args) -> DgpSpec:
    name = args.dgp
    if name == "arma":
        if args.phi is None and args.theta is None:
            base = preset("arma")
            return ArmaSpec(base.phi, base.theta, args.noise_sd)
        return ArmaSpec(tuple(args.phi or ()), tuple(args.theta or ()), args.noise_sd)
    if name == "ar_arch":
        return ArArchSpec(
            0.8 if args.phi1 is None else args.phi1,
            args.omega,
            0.99 if args.alpha1 is None else args.alpha1,
        )
    if name == "markov":
        return preset("markov")
    raise UsageError("a data source is required: --input FILE or --dgp NAME")


def _series_from_args(args, stream: RngStream) -> tuple[Series, str]:
    if args.input is not None:
        if args.dgp is not None:
            raise UsageError("give either --input or --dgp, not both")
        return read_series(args.input), args.input
    spec = dgp_from_args(args)
    return simulate(spec, args.n, args.burnin, stream).series, f"{spec.name} simulation"


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return _NoClose(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


class _NoClose(io.TextIOBase):
    def __init__(self, stream):
        self._s = stream

    def write(self, s):
        return self._s.write(s)

    def __exit__(self, *exc):
        self._s.flush()


def cmd_bound(args) -> int:
    if args.d is None:
        raise UsageError("--d is required")
    root = RngStream(args.seed)
    series, source = _series_from_args(args, root.spawn(0))
    if len(args.alpha) != 1:
        raise UsageError("bound takes a single --alpha")
    res = gen_error_bound(series, args.d, args.B, args.alpha[0], args.ell, root.spawn(1))
    if args.output is not None and args.output != "-":
        eta_path = args.eta_output or str(Path(args.output).with_suffix("")) + "_eta.csv"
    else:
        eta_path = args.eta_output
    summary = [
        ("train_error", fmt(res.train_error)),
        ("eta_quantile", fmt(res.eta_quantile)),
        ("upper_bound", fmt(res.upper_bound)),
        ("alpha", fmt(res.alpha)),
        ("ell_used", res.ell_used),
        ("B", len(res.eta_samples)),
        ("n_failed", res.n_failed),
        ("seed", res.seed),
    ]
    if args.output is not None:
        with _open_out(args.output) as out:
            w = csv.writer(out, lineterminator="\n")
            w.writerow([k for k, _ in summary])
            w.writerow([v for _, v in summary])
    if eta_path is not None:
        with _open_out(eta_path) as out:
            out.write("replicate,eta\n")
            for i, e in enumerate(res.eta_samples):
                out.write(f"{i},{fmt(e)}\n")
    # keep stdout clean when it carries CSV
    stream = sys.stderr if "-" in (args.output, eta_path) else sys.stdout
    print(
        f"{source}: n={len(series)} d={args.d} ell={res.ell_used} B={len(res.eta_samples)}\n"
        f"training error {res.train_error:.4g}, eta quantile {res.eta_quantile:.4g}\n"
        f"{100 * (1 - res.alpha):.4g}% upper bound on risk: {res.upper_bound:.4g}",
        file=stream,
    )
    return 0


def cmd_simulate(args) -> int:
    spec = dgp_from_args(args)
    series = simulate(spec, args.n, args.burnin, RngStream(args.seed)).series
    header = {"spec": repr(spec), "n": args.n, "burnin": args.burnin, "seed": args.seed}
    with _open_out(args.output) as out:
        write_series(series, out, header)
    return 0


def cmd_coverage(args) -> int:
    spec = dgp_from_args(args)
    d = args.d if args.d is not None else PRESET_D[args.dgp]
    reports = coverage_sweep(
        spec, d, args.sizes, args.n_outer, args.B, args.alpha, RngStream(args.seed),
        ell=args.ell, horizon=args.horizon, burnin=args.burnin, oracle_mode=args.oracle,
        workers=args.threads, dgp_name=args.dgp,
    )
    with _open_out(args.output) as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(COVERAGE_COLUMNS)
        for rep in reports:
            for dgp, n, alpha, cov, n_outer, B, failures in rep.rows():
                w.writerow([dgp, n, fmt(alpha), fmt(cov), n_outer, B, failures])
    return 0


def cmd_cv(args) -> int:
    d = 3 if args.d is None else args.d
    if args.k < 2:
        raise UsageError(f"--k must be >= 2, got {args.k}")
    if args.normality:
        if args.input is not None:
            raise UsageError("--normality simulates its own series; use --dgp")
        spec = dgp_from_args(args)
        z = cv_normality_samples(spec, args.n, d, args.k, args.n_runs, RngStream(args.seed), args.burnin)
        with _open_out(args.output) as out:
            out.write("theoretical,sample\n")
            for a, b in qq_data(z):
                out.write(f"{fmt(a)},{fmt(b)}\n")
        return 0
    series, _ = _series_from_args(args, RngStream(args.seed))
    risk = kfold_cv_risk(series, d, args.k)
    with _open_out(args.output) as out:
        out.write(fmt(risk.value) + "\n")
    return 0


def cmd_blocklength(args) -> int:
    series, _ = _series_from_args(args, RngStream(args.seed))
    with _open_out(args.output) as out:
        out.write(f"{block_length(series)}\n")
    return 0


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "cv": cmd_cv,
    "blocklength": cmd_blocklength,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = resolve(parser, argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"blockbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"blockbound: invalid process specification: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDesignError as exc:
        print(f"blockbound: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputError as exc:
        print(f"blockbound: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
