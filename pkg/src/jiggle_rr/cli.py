"""Command-line entry point ``jiggle-rr``.

Every subcommand reads an optional flat ``key = value`` config file
(``--config``); command-line flags override config entries. Keys are the
long option names with dashes or underscores. Outputs go to ``--output``
or to stdout.

Exit codes: 0 success, 1 quantum FLO scan failed, 2 configuration error,
3 numerical non-convergence, 4 runaway overflow.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .dynamics import (al_char_roots, al_trajectory, amended_trajectory,
                       volterra_evolve)
from .errors import (BandwidthError, ContourDegenerateError, ContourResolutionError,
                     ConvergenceError, DomainError, NearResonanceError,
                     RunawayOverflowError)
from .flo import reports_to_json, scan, symmetric_log_grid
from .kernel import TAU_MIN, kernel_table
from .model import QUANTUM, FieldStatistics, ReducedParams
from .spectrum import SpectrumSample, mu_boundary_array, mu_complex_array, spectrum_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RUNAWAY = 0, 1, 2, 3, 4


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ------------------------------------------------------------ value types

def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return v


def _beta(text):
    t = str(text).strip().lower()
    if t in ("inf", "infinite", "infinity"):
        return math.inf
    return _float(t)


def parse_grid(text, beta=False):
    """Grid from ``a,b,c``, ``lin:a:b:n``, ``log:a:b:n`` or ``symlog:a:b:n``.

    ``symlog`` gives ``-logspace`` followed by ``+logspace`` (2n points).
    """
    t = str(text).strip()
    try:
        if t.startswith(("lin:", "log:", "symlog:")):
            kind, a, b, n = t.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "lin":
                return np.linspace(a, b, n)
            if a <= 0 or b <= 0:
                raise ValueError
            if kind == "log":
                return np.logspace(math.log10(a), math.log10(b), n)
            return symmetric_log_grid(a, b, n)
        conv = _beta if beta else float
        vals = [conv(x) for x in t.split(",") if x.strip()]
        if not vals:
            raise ValueError
        return np.array(vals, dtype=float)
    except (ValueError, argparse.ArgumentTypeError):
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _grid(text):
    return parse_grid(text)


def _beta_grid(text):
    return parse_grid(text, beta=True)


def _point(text):
    try:
        x, y = (float(v) for v in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return complex(x, y)


def _threads_default():
    env = os.environ.get("JIGGLE_RR_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"JIGGLE_RR_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("JIGGLE_RR_THREADS must be >= 1")
    return n


# ----------------------------------------------------------------- parser

def _common(p, stats=True):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--output", "-o", help="output path (default: stdout)")
    p.add_argument("--threads", type=int, help="worker threads (default $JIGGLE_RR_THREADS or 1)")
    if stats:
        p.add_argument("--stats", choices=["quantum", "classical"], default="quantum")
        p.add_argument("--tol", type=_float, help="quadrature tolerance")


def _params(p):
    p.add_argument("--chi", type=_float, default=1.0, help="omega_I / omega_M")
    p.add_argument("--beta", type=_beta, default=math.inf,
                   help="beta omega_I ('inf' for zero temperature)")
    p.add_argument("--gamma", type=_float, default=1.0, help="gamma omega_I")
    p.add_argument("--omega0", type=_float, default=1.0, help="omega0 / omega_I")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jiggle-rr",
                     description="Amended Abraham-Lorentz dynamics of a jiggling dipole.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kernel", help="memory kernel D(tau) on a grid (CSV)")
    _common(p)
    _params(p)
    p.add_argument("--tau-grid", type=_grid, default=parse_grid("log:0.01:10:8"))
    p.add_argument("--tau-min", type=_float, default=TAU_MIN)

    p = sub.add_parser("spectrum", help="spectral distribution mu (CSV)")
    _common(p)
    _params(p)
    p.add_argument("--omega-grid", type=_grid, default=parse_grid("symlog:0.1:10:11"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--boundary", action="store_true", help="boundary values mu(w + i0) (default)")
    g.add_argument("--complex", type=_point, metavar="X,Y", help="single point z = X + iY")

    p = sub.add_parser("flo-scan", help="positive-real-function scan (JSON)")
    _common(p)
    p.add_argument("--chi-grid", type=_grid, default=parse_grid("0.1,1,10"))
    p.add_argument("--beta-grid", type=_beta_grid, default=parse_grid("0.1,1,10,inf", True))
    p.add_argument("--omega-grid", type=_grid, default=parse_grid("symlog:0.01:10:81"))
    p.add_argument("--gamma", type=_float, default=1.0)
    p.add_argument("--omega0", type=_float, default=1.0)
    p.add_argument("--analyticity", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--zeros", action=argparse.BooleanOptionalAction, default=False,
                   help="also count upper-half-plane zeros (slow)")

    p = sub.add_parser("roots", help="Abraham-Lorentz characteristic roots (JSON)")
    _common(p, stats=False)
    p.add_argument("--gamma", type=_float, default=0.1)
    p.add_argument("--omega0", type=_float, default=1.0)

    p = sub.add_parser("evolve", help="dipole trajectory (CSV)")
    _common(p)
    _params(p)
    p.add_argument("--model", choices=["classical-al", "amended", "volterra"], default="amended")
    p.add_argument("--r0", type=_float, default=1.0)
    p.add_argument("--v0", type=_float, default=0.0)
    p.add_argument("--T", type=_float, default=50.0)
    p.add_argument("--dt", type=_float, default=0.01)
    p.add_argument("--n-samples", type=int, default=4096)
    p.add_argument("--tau-min", type=_float, default=TAU_MIN)
    p.add_argument("--suppress-runaway", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("markov-probe", help="D(tau) along decreasing chi (CSV)")
    _common(p)
    p.add_argument("--tau", type=_float, default=2.0)
    p.add_argument("--chi-grid", type=_grid, default=parse_grid("1,1e-2,1e-3,1e-4"))
    p.add_argument("--beta", type=_beta, default=math.inf)
    p.add_argument("--gamma", type=_float, default=1.0)
    p.add_argument("--omega0", type=_float, default=1.0)
    p.add_argument("--tau-min", type=_float, default=TAU_MIN)
    return parser


def read_config(path) -> list:
    """``key = value`` lines; '#' starts a comment. Returns (key, value) pairs."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    out = []
    for k, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{k}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{k}: empty key")
        out.append((key.replace("_", "-").lower(), value))
    return out


def _config_argv(sub, pairs):
    """Translate config pairs into flags understood by the subparser."""
    known = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:].lower()] = (action, opt[2:])
    argv = []
    for key, value in pairs:
        action, key = known.get(key, (None, key))
        if action is None or key in ("config", "help") or key.startswith("no-"):
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(action, argparse.BooleanOptionalAction):
            v = value.lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"config key {key!r} needs true or false")
            argv.append(f"--{key}" if v in ("true", "1", "yes") else f"--no-{key}")
        elif action.nargs == 0:
            if value.lower() in ("true", "1", "yes"):
                argv.append(f"--{key}")
            elif value.lower() not in ("false", "0", "no"):
                raise ConfigError(f"config key {key!r} needs true or false")
        else:
            argv.append(f"--{key}={value}")
    return argv


def parse(argv):
    """Parse flags, folding in the config file. Raises ConfigError."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        extra = _config_argv(sub, read_config(args.config))
        # config first so that explicit flags win
        args = parser.parse_args([args.command] + extra + list(argv[1:]))
    if args.threads is None:
        args.threads = _threads_default()
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return args


def _reduced(args) -> ReducedParams:
    return ReducedParams.create(args.chi, args.beta, args.gamma, args.omega0)


# ---------------------------------------------------------------- commands

def _emit(args, text):
    if args.output:
        with open(args.output, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_kernel(args):
    params = _reduced(args)
    tol = 1e-10 if args.tol is None else args.tol
    try:
        table = kernel_table(args.tau_grid, params, args.stats, tol, args.tau_min,
                             threads=args.threads)
    except ConvergenceError as exc:
        if exc.partial is not None:
            _emit(args, exc.partial.to_csv())
        raise
    _emit(args, table.to_csv())
    return EXIT_OK


def cmd_spectrum(args):
    params = _reduced(args)
    stats = FieldStatistics.parse(args.stats)
    tol = 1e-9 if args.tol is None else args.tol
    if args.complex is not None:
        mu, err, ok = mu_complex_array([args.complex], params, stats, tol)
        samples = [SpectrumSample(float(mu[0].real), float(mu[0].imag), float(err[0]),
                                  float(err[0]), stats, z=args.complex)]
    else:
        w = args.omega_grid
        mu, re_err, im_err, ok = mu_boundary_array(w, params, stats, tol)
        samples = [SpectrumSample(float(m.real), float(m.imag), float(a), float(b), stats,
                                  omega=float(x))
                   for x, m, a, b in zip(w, mu, re_err, im_err)]
    text = spectrum_csv(samples)
    if not ok.all():
        text = _mark_failures(text, ok)
        _emit(args, text)
        raise ConvergenceError(f"{int((~ok).sum())} spectrum point(s) did not converge")
    _emit(args, text)
    return EXIT_OK


def _mark_failures(text, ok):
    lines = text.splitlines()
    for i, good in enumerate(ok, 1):
        if not good:
            cols = lines[i].split(",")
            cols[3] = cols[4] = "nan"
            lines[i] = ",".join(cols)
    return "\n".join(lines) + "\n"


def cmd_flo_scan(args):
    stats = FieldStatistics.parse(args.stats)
    reports = scan(args.chi_grid, args.beta_grid, args.omega_grid, stats, args.tol,
                   args.gamma, args.omega0, analyticity=args.analyticity,
                   zeros=args.zeros, threads=args.threads)
    _emit(args, reports_to_json(reports))
    if any(not r.converged for r in reports):
        raise ConvergenceError("at least one scan cell did not converge")
    if stats is QUANTUM and not all(r.passed for r in reports):
        return EXIT_FAIL
    return EXIT_OK


def cmd_roots(args):
    cr = al_char_roots(args.gamma, args.omega0)
    _emit(args, json.dumps(cr.as_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_evolve(args):
    if args.model == "classical-al":
        tr = al_trajectory(args.gamma, args.omega0, args.r0, args.v0, args.T, args.dt,
                           args.suppress_runaway)
    elif args.model == "amended":
        tr = amended_trajectory(args.r0, args.v0, args.T, args.n_samples, _reduced(args),
                                args.stats, threads=args.threads)
    else:
        tol = 1e-10 if args.tol is None else args.tol
        tr = volterra_evolve(args.r0, args.v0, args.T, args.dt, _reduced(args), args.stats,
                             tau_min=args.tau_min, tol=tol, threads=args.threads)
    _emit(args, tr.to_csv())
    return EXIT_OK


def cmd_markov_probe(args):
    from .kernel import memory_kernel_d

    tol = 1e-10 if args.tol is None else args.tol
    chis = np.asarray(args.chi_grid, dtype=float)
    if chis.size == 0 or np.any(np.diff(chis) >= 0):
        raise DomainError("chi grid must be strictly decreasing")
    rows = ["chi,D,err"]
    for c in chis:
        p = ReducedParams.create(c, args.beta, args.gamma, args.omega0)
        v, e = memory_kernel_d(args.tau, p, args.stats, tol, args.tau_min)
        rows.append(f"{c:.17g},{v:.17g},{e:.17g}")
    _emit(args, "\n".join(rows) + "\n")
    return EXIT_OK


COMMANDS = {
    "kernel": cmd_kernel,
    "spectrum": cmd_spectrum,
    "flo-scan": cmd_flo_scan,
    "roots": cmd_roots,
    "evolve": cmd_evolve,
    "markov-probe": cmd_markov_probe,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except ConfigError as exc:
        print(f"jiggle-rr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        if getattr(args, "stats", None) is not None and hasattr(args, "beta"):
            FieldStatistics.parse(args.stats).validate(args.beta)
        return COMMANDS[args.command](args)
    except RunawayOverflowError as exc:
        print(f"jiggle-rr: runaway overflow (timescale {exc.timescale:.6g}): {exc}",
              file=sys.stderr)
        return EXIT_RUNAWAY
    except (ConvergenceError, ContourResolutionError, ContourDegenerateError,
            NearResonanceError, BandwidthError) as exc:
        print(f"jiggle-rr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"jiggle-rr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
