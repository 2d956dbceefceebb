"""Command-line entry point.

Subcommands::

    dynologit simulate    --n 1000 --J 4 --k 3 --seed 1 --output panel.csv
    dynologit fit         --input panel.csv --J 4 --k 3 --kernel exact --output fit.json
    dynologit bootstrap   --input panel.csv --J 4 --k 3 --reps 500 --output boot.json
    dynologit check       --J 4 --k 3 --seed 7
    dynologit transitions --input panel.csv --J 4 --k 3
    dynologit sweep       --input panel.csv --J 4 --k 3 --covariates x1:discrete,x2:continuous --h-list 0.1,1,10

Input panels are long format with a header: ``id,time,y,<covariates>``.
``--covariates`` is a comma list of ``name:kind`` (kind ``discrete`` or
``continuous``); for ``simulate`` an optional generator follows the kind,
e.g. ``x1:discrete:uniform:0;1;2`` or ``x2:continuous:gaussian:0;1``.

JSON output fields (fit): toolkit, version, model, shape, n, param_names,
estimates, se, ci_low, ci_high, vcov{names, rows}, loglik, iterations,
converged, stop_reason, cell_counts, warnings, free, config, plus
``ingest`` (row/drop counts), ``interpretation`` and ``baseline`` when
requested.  CSV output (fit): name, estimate, se, ci_low, ci_high.

Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation error or
failed check.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .checks import run_all
from .core import (
    CONTINUOUS,
    DISCRETE,
    Bernoulli,
    DgpConfig,
    Gaussian,
    ModelShape,
    Params,
    parse_alpha_scheme,
    parse_covariate_scheme,
    simulate,
)
from .dataio import (
    PanelSchema,
    load_theta,
    read_panel,
    result_to_dict,
    transition_matrix,
    write_json,
    write_panel,
    write_results,
)
from .estimator import FitConfig, bootstrap, fit, fit_pooled, interpret
from .events import BandwidthConfig
from .exceptions import DataError, DynologitError, EstimationError, InvalidParameterError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3
DEFAULT_H_LIST = (0.1, 1.0, 10.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _shared(p):
    g = p.add_argument_group("shared")
    g.add_argument("--input", help="long-format panel CSV")
    g.add_argument("--output", help="machine-readable output path")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    g.add_argument("--delimiter", default=",", help="field delimiter; 'tab' for tab")
    m = p.add_argument_group("model")
    m.add_argument("--J", type=int, default=4, help="number of categories")
    m.add_argument("--k", type=int, default=3, help="lag cutoff / normalised threshold")
    m.add_argument("--covariates", default=None, help="name:kind list, e.g. x1:discrete,x2:continuous")


def _model_flags(p):
    p.add_argument("--h", type=float, default=None, help="bandwidth for continuous covariates")
    p.add_argument("--kernel", choices=("gaussian", "uniform", "exact"), default=None)
    p.add_argument("--tol-grad", type=float, default=1e-8)
    p.add_argument("--tol-step", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--min-cell-weight", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynologit", description="Fixed-effects dynamic ordered logit toolkit.")
    parser.add_argument("--version", action="version", version=f"dynologit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="draw a panel from the model")
    _shared(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--theta", help="JSON file with beta, rho, gamma")
    p.add_argument("--alpha-scheme", default="correlated:0.5", help="constant:c | gaussian:m,s | correlated:loading")
    p.add_argument("--burn-in", type=int, default=20)

    p = sub.add_parser("fit", help="composite conditional ML fit")
    _shared(p)
    _model_flags(p)
    p.add_argument("--baseline", choices=("none", "pooled", "pooled-lag"), default="none")

    p = sub.add_parser("bootstrap", help="cluster bootstrap of the composite fit")
    _shared(p)
    _model_flags(p)
    p.add_argument("--reps", type=int, default=500)

    p = sub.add_parser("check", help="oracle, identification, derivative and concavity checks")
    _shared(p)

    p = sub.add_parser("transitions", help="empirical transition matrix of the panel")
    _shared(p)

    p = sub.add_parser("sweep", help="refit across kernel bandwidths")
    _shared(p)
    _model_flags(p)
    p.add_argument("--h-list", default=",".join(str(h) for h in DEFAULT_H_LIST))
    return parser


# --------------------------------------------------------------------------
# argument helpers

def _covariate_items(text):
    """``name:kind[:generator]`` items; the generator keeps its own ``:`` and ``;``."""
    items = []
    for raw in filter(None, (s.strip() for s in (text or "").split(","))):
        name, _, rest = raw.partition(":")
        kind, _, gen = rest.partition(":")
        kind = {"d": DISCRETE, "c": CONTINUOUS, "": DISCRETE}.get(kind, kind)
        if not name or kind not in (DISCRETE, CONTINUOUS):
            raise UsageError(f"bad covariate spec {raw!r}; expected name:discrete or name:continuous")
        items.append((name, kind, gen))
    return items


def _header_covariates(args):
    """Covariate columns from the input header when ``--covariates`` is absent (all discrete)."""
    try:
        with open(args.input, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh, delimiter=_delimiter(args)), None)
    except OSError as exc:
        raise DataError(f"cannot open {args.input}: {exc}") from exc
    if not header:
        raise DataError(f"{args.input}: empty file")
    return [(c, DISCRETE, "") for c in header if c not in ("id", "time", "y")]


def _delimiter(args):
    return "\t" if args.delimiter in ("tab", "\\t") else args.delimiter


def _schema(args):
    if not args.input:
        raise UsageError(f"{args.subcommand} needs --input")
    items = _covariate_items(args.covariates) if args.covariates else _header_covariates(args)
    return PanelSchema(args.J, args.k, tuple((n, k) for n, k, _ in items), delimiter=_delimiter(args))


def _bandwidth(args, kinds) -> BandwidthConfig:
    kernel = args.kernel
    if kernel is None:
        kernel = "gaussian" if CONTINUOUS in kinds else "exact"
    if kernel == "exact":
        if args.h is not None:
            raise UsageError("--h is not allowed with --kernel exact")
        return BandwidthConfig.exact_mode()
    if args.h is None:
        raise UsageError(f"--kernel {kernel} requires --h")
    return BandwidthConfig(h=args.h, kernel=kernel)


def _fit_config(args, bw) -> FitConfig:
    return FitConfig(args.tol_grad, args.tol_step, args.max_iter, bandwidth=bw, min_cell_weight=args.min_cell_weight)


def _echo(args):
    cfg = {k: v for k, v in sorted(vars(args).items())}
    print("config " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _default_theta(shape: ModelShape) -> Params:
    beta = tuple(1.0 if m % 2 == 0 else -0.5 for m in range(shape.K))
    gamma = tuple(1.5 * (j - shape.k) for j in shape.free_thresholds)
    return Params(beta, 0.7, gamma)


# --------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args):
    items = _covariate_items(args.covariates or "x1:discrete:bernoulli:0.5,x2:discrete:bernoulli:0.5")
    gens = []
    for name, kind, gen in items:
        if gen:
            g = parse_covariate_scheme(gen)
            if g.kind != kind:
                raise UsageError(f"covariate {name}: generator {gen!r} is {g.kind}, declared {kind}")
        else:
            g = Bernoulli(0.5) if kind == DISCRETE else Gaussian(0.0, 1.0)
        gens.append(g)
    shape = ModelShape(args.J, len(gens), args.k)
    theta = load_theta(args.theta, shape) if args.theta else _default_theta(shape)
    config = DgpConfig(shape, theta, parse_alpha_scheme(args.alpha_scheme), tuple(gens), args.burn_in, args.seed)
    ds, x0 = simulate(config, args.n, return_period0=True)
    names = tuple(n for n, _, _ in items)
    ds = type(ds)(ds.shape, ds.ids, ds.Y, ds.X, names, ds.covariate_kind)
    if args.output:
        write_panel(args.output, ds, x0, delimiter=_delimiter(args))
    print(f"simulated {len(ds)} individuals, J={shape.J}, k={shape.k}, covariates {', '.join(names)}")
    return EXIT_OK


def _load(args):
    schema = _schema(args)
    ds, report = read_panel(args.input, schema)
    return ds, report


def _cmd_fit(args):
    ds, report = _load(args)
    cfg = _fit_config(args, _bandwidth(args, ds.covariate_kind))
    res = fit(ds, cfg)
    print(res.table())
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    extra = {"ingest": report.to_dict(), "interpretation": interpret(res.theta_hat, ds.shape, ds.covariate_names)}
    if args.baseline != "none":
        base = fit_pooled(ds, with_lag=args.baseline == "pooled-lag", cfg=cfg)
        print(f"\nbaseline {base.model}")
        print(base.table())
        extra["baseline"] = result_to_dict(base)
    if args.output:
        write_results(res, args.output, args.format, extra)
    return EXIT_OK


def _cmd_bootstrap(args):
    ds, report = _load(args)
    cfg = _fit_config(args, _bandwidth(args, ds.covariate_kind))
    res = fit(ds, cfg)
    boot = bootstrap(ds, cfg, B=args.reps, seed=args.seed, n_jobs=max(1, args.threads))
    print(res.table())
    print()
    print(boot.table())
    if args.output:
        payload = {"fit": result_to_dict(res), "ingest": report.to_dict(), "bootstrap": {
            "param_names": boot.param_names, "se": boot.se, "ci_low": boot.ci_low, "ci_high": boot.ci_high,
            "reps": boot.n_requested, "dropped": boot.n_dropped, "seed": boot.seed,
        }}
        if args.format == "csv":
            with open(args.output, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["name", "estimate", "sandwich_se", "bootstrap_se", "ci_low", "ci_high"])
                for row in zip(res.param_names, res.estimates, res.se, boot.se, boot.ci_low, boot.ci_high):
                    w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
        else:
            write_json(args.output, payload)
    return EXIT_OK


def _cmd_check(args):
    K = len(_covariate_items(args.covariates)) if args.covariates else 2
    results = run_all(ModelShape(args.J, K, args.k), args.seed)
    for r in results:
        print(r.line())
    if args.output:
        write_json(args.output, [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_ESTIMATION


def _cmd_transitions(args):
    ds, report = _load(args)
    tm = transition_matrix(ds)
    print(tm.table())
    print(f"spells kept {report.spells_kept} of {report.individuals_seen}", file=sys.stderr)
    if args.output:
        write_json(args.output, {"counts": tm.counts, "freq": tm.freq, "marginals": tm.marginals, "ingest": report.to_dict()})
    return EXIT_OK


def _cmd_sweep(args):
    ds, report = _load(args)
    if CONTINUOUS not in ds.covariate_kind:
        raise UsageError("all covariates are discrete: bandwidth has no effect, use fit --kernel exact")
    if args.kernel == "exact":
        raise UsageError("sweep needs --kernel gaussian or uniform")
    if args.h is not None:
        raise UsageError("sweep takes --h-list, not --h")
    try:
        hs = [float(h) for h in args.h_list.split(",") if h.strip()]
    except ValueError:
        raise UsageError(f"bad --h-list {args.h_list!r}") from None
    if not hs or min(hs) <= 0:
        raise UsageError("--h-list needs positive bandwidths")
    kernel = args.kernel or "gaussian"
    fits = [fit(ds, _fit_config(args, BandwidthConfig(h=h, kernel=kernel))) for h in hs]
    names = fits[0].param_names
    est = np.array([f.estimates for f in fits])
    se = np.array([f.se for f in fits])
    # flag parameters whose estimate moves by more than 2 SEs (largest SE among the pair) between any two h
    flags = []
    for p in range(len(names)):
        moved = any(
            abs(est[a, p] - est[b, p]) > 2 * max(se[a, p], se[b, p])
            for a in range(len(hs)) for b in range(a + 1, len(hs))
        )
        flags.append(moved)
    head = f"{'parameter':<16}" + "".join(f"{'h=' + format(h, 'g'):>24}" for h in hs) + "  moved>2se"
    print(head)
    for p, name in enumerate(names):
        cells = "".join(f"{est[i, p]:>12.5f}{'(' + format(se[i, p], '.5f') + ')':>12}" for i in range(len(hs)))
        print(f"{name:<16}{cells}  {'*' if flags[p] else ''}")
    if args.output:
        write_json(args.output, {
            "param_names": names, "h": hs, "kernel": kernel, "estimates": est, "se": se,
            "moved_over_2se": flags, "ingest": report.to_dict(),
        })
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "bootstrap": _cmd_bootstrap,
    "check": _cmd_check,
    "transitions": _cmd_transitions,
    "sweep": _cmd_sweep,
}


def run(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    _echo(args)
    try:
        return COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"dynologit {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"dynologit {args.subcommand}: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dynologit {args.subcommand}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"dynologit {args.subcommand}: estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except DynologitError as exc:
        print(f"dynologit {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
