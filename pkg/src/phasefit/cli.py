"""Batch command-line interface.

Subcommands: eval, fit, fit-ocp, sweep, sample, gof, serve. All randomness
is controlled by --seed; machine-readable output goes to --out (stdout by
default) and diagnostics to stderr only, so identical argv + seed produce
byte-identical output documents.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dataio, fit, gof, ocp, phd
from .errors import (EmptyDataset, FormatError, HorizonTooSmall,
                     InsufficientData, InvalidCutPoint, InvalidData,
                     InvalidMatrix, InvalidModel, InvalidSpec, IoError,
                     MissingModel, PhasefitError, TailUnderflow)

_DATA_ERRORS = (FormatError, InvalidData, EmptyDataset, InvalidCutPoint,
                InsufficientData, InvalidSpec, IoError, MissingModel,
                HorizonTooSmall)
_NUMERIC_ERRORS = (InvalidModel, InvalidMatrix, TailUnderflow,
                   np.linalg.LinAlgError, FloatingPointError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise _UsageError(message)


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _build_parser() -> _Parser:
    parser = _Parser(prog="phasefit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_flags(p):
        p.add_argument("--model", help="model document file (overrides flags)")
        p.add_argument("--structure", default="erlang",
                       choices=list(phd.STRUCTURE_KINDS))
        p.add_argument("--states", type=int, default=2)
        p.add_argument("--rate", help="rate or comma-separated rates")
        p.add_argument("--rate2", help="second-zone rate (two-zone model)")
        p.add_argument("--cut", type=float, help="cut time (two-zone model)")
        p.add_argument("--alpha", help="comma-separated initial probabilities")
        p.add_argument("--branch", help="comma-separated branch probabilities")
        p.add_argument("--mix", help="hyper-Erlang mix weight:shape:rate,...")

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="-", help="output path (default stdout)")

    def add_fit_opts(p):
        p.add_argument("--restarts", type=int, default=5)
        p.add_argument("--max-iter", type=int, default=2000)
        p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("eval", help="evaluate model curves on a grid (CSV)")
    add_model_flags(p)
    p.add_argument("--horizon", type=float)
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--curves", default="pdf,survival,hazard,cum_hazard")
    add_common(p)

    p = sub.add_parser("fit", help="fit classical models to data")
    p.add_argument("--input", help="single-column data file")
    p.add_argument("--method", choices=["point", "group", "density"],
                   default="point")
    p.add_argument("--structure", choices=list(fit.POINT_STRUCTURES),
                   default="general")
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--edges", help="bin edges for --method group")
    p.add_argument("--bins", type=int, help="equal-width bin count for group")
    p.add_argument("--truncated", type=int, default=0,
                   help="count beyond the last edge")
    p.add_argument("--density", help="target for --method density, "
                                     "e.g. weibull:shape=3,scale=0.5")
    p.add_argument("--horizon", type=float, help="quadrature horizon")
    p.add_argument("--nodes", type=int, default=128)
    add_fit_opts(p)
    add_common(p)

    p = sub.add_parser("fit-ocp", help="fit the two-zone model at a cut")
    p.add_argument("--input", required=True)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--cut", type=float, required=True)
    p.add_argument("--compare", action="store_true",
                   help="include the classical single-rate fit for comparison")
    add_fit_opts(p)
    add_common(p)

    p = sub.add_parser("sweep", help="fit a grid of structures and states")
    p.add_argument("--input", required=True)
    p.add_argument("--structures", default="general,cf1,hyper_erlang,erlang")
    p.add_argument("--m-range", default="2:4", help="inclusive LO:HI")
    add_fit_opts(p)
    add_common(p)

    p = sub.add_parser("sample", help="simulate lifetimes from a model")
    add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    add_common(p)

    p = sub.add_parser("gof", help="goodness of fit of a model against data")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, dest="model_doc")
    p.add_argument("--method", choices=["asymptotic", "bootstrap"],
                   default="asymptotic")
    p.add_argument("--replicates", type=int, default=199)
    add_common(p)

    p = sub.add_parser("serve", help="run the HTTP fitting service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8741)
    return parser


def _model_from_flags(args):
    if args.model:
        return dataio.read_model(args.model)
    rates = _floats(args.rate) if args.rate else None
    if args.cut is not None or args.rate2 is not None:
        if args.cut is None or args.rate2 is None or not rates:
            raise InvalidSpec("two-zone models need --rate, --rate2 and --cut")
        return ocp.erlang_zones(args.states, rates[0], float(args.rate2),
                                args.cut)
    mix = None
    if args.mix:
        mix = []
        for part in args.mix.split(","):
            w, r, lam = part.split(":")
            mix.append((float(w), int(r), float(lam)))
    spec = phd.StructureSpec(
        kind=args.structure,
        m=args.states,
        rates=rates if rates is None or len(rates) > 1 else rates[0],
        branch=_floats(args.branch) if args.branch else None,
        alpha=_floats(args.alpha) if args.alpha else None,
        mix=mix,
    )
    return phd.make_structure(spec)


def _write_out(args, text: str) -> None:
    if args.out == "-":
        sys.stdout.write(text)
    else:
        dataio._write_text(args.out, text)


def _opts(args) -> fit.FitOptions:
    return fit.FitOptions(max_iter=args.max_iter, rel_tol=args.tol,
                          restarts=args.restarts, seed=args.seed)


def _cmd_eval(args) -> int:
    model = _model_from_flags(args)
    horizon = args.horizon
    if horizon is None:
        if isinstance(model, ocp.OneCutPointPhaseType):
            horizon = 5.0 * ocp.ocp_moments(model)[0]
        else:
            horizon = phd.default_horizon(model)
    curves = tuple(c.strip() for c in args.curves.split(",") if c.strip())
    req = dataio.PlotRequest(horizon=horizon, points=args.points, curves=curves)
    series = dataio.plot_series(model, req)
    if len(curves) == 1:
        _write_out(args, dataio.series_csv(series[curves[0]]))
    else:
        blocks = [f"# curve: {name}\n" + dataio.series_csv(series[name])
                  for name in curves]
        _write_out(args, "".join(blocks))
    return 0


def _parse_density(text: str):
    from scipy import stats

    name, _, params_text = text.partition(":")
    params = {}
    for tok in params_text.split(","):
        if tok.strip():
            key, _, val = tok.partition("=")
            params[key.strip()] = float(val)
    if name == "weibull":
        frozen = stats.weibull_min(params["shape"], scale=params["scale"])
    elif name == "gamma":
        frozen = stats.gamma(params["shape"], scale=params["scale"])
    elif name == "lognormal":
        frozen = stats.lognorm(params["sigma"], scale=np.exp(params["mu"]))
    elif name == "exponential":
        frozen = stats.expon(scale=1.0 / params["rate"])
    else:
        raise InvalidSpec(f"unknown density family {name!r}")
    return lambda x: float(frozen.pdf(x))


def _cmd_fit(args) -> int:
    opts = _opts(args)
    if args.method == "density":
        if not args.density or args.horizon is None:
            raise _UsageError("--method density needs --density and --horizon")
        result = fit.fit_density(_parse_density(args.density), args.horizon,
                                 args.nodes, args.structure, args.states, opts)
        dataio.write_report([(result, None)], _OutBuffer(args))
        return 0
    if not args.input:
        raise _UsageError(f"--method {args.method} needs --input")
    data = dataio.read_dataset(args.input)
    if args.method == "point":
        result = fit.em_fit_point(data, args.structure, args.states, opts)
        report = gof.gof_report(data, result.model)
        dataio.write_report([(result, report)], _OutBuffer(args))
        return 0
    # grouped
    if args.edges:
        edges = np.asarray(_floats(args.edges))
    elif args.bins:
        edges = np.linspace(0.0, float(data.values.max()), args.bins + 1)
    else:
        raise _UsageError("--method group needs --edges or --bins")
    counts, _ = np.histogram(data.values, bins=edges)
    grouped = dataio.GroupedDataset(edges, counts,
                                    right_truncated_count=args.truncated
                                    + int(np.sum(data.values > edges[-1])))
    result = fit.em_fit_group(grouped, args.structure, args.states, opts)
    report = gof.gof_report(data, result.model)
    dataio.write_report([(result, report)], _OutBuffer(args))
    return 0


class _OutBuffer:
    """File-like adapter routing write_report through --out handling."""

    def __init__(self, args):
        self.args = args

    def write(self, text):
        _write_out(self.args, text)


def _cmd_fit_ocp(args) -> int:
    data = dataio.read_dataset(args.input)
    opts = _opts(args)
    if args.compare:
        (classical, gof_c), (two_zone, gof_o), _ = fit.compare_ocp(
            data, args.states, args.cut, opts)
        dataio.write_report([(two_zone, gof_o), (classical, gof_c)],
                            _OutBuffer(args))
    else:
        result = fit.fit_ocp(data, args.states, args.cut, opts)
        report = gof.gof_report(data, result.model)
        dataio.write_report([(result, report)], _OutBuffer(args))
    return 0


def _cmd_sweep(args) -> int:
    data = dataio.read_dataset(args.input)
    lo, _, hi = args.m_range.partition(":")
    m_range = (int(lo), int(hi or lo))
    structures = [s.strip() for s in args.structures.split(",") if s.strip()]
    rows = fit.sweep_states(data, structures, m_range, _opts(args))
    doc = {"schema": dataio.SCHEMA, "kind": "sweep",
           "rows": [row.to_doc() for row in rows]}
    _write_out(args, dataio.dumps(doc))
    return 0


def _cmd_sample(args) -> int:
    model = _model_from_flags(args)
    if isinstance(model, ocp.OneCutPointPhaseType):
        values = ocp.ocp_sample(model, args.n, args.seed)
    else:
        values = phd.sample(model, args.n, args.seed)
    dataio.write_dataset(values, _OutBuffer(args))
    return 0


def _cmd_gof(args) -> int:
    data = dataio.read_dataset(args.input)
    model = dataio.read_model(args.model_doc)
    refit = None
    if args.method == "bootstrap" and isinstance(model, phd.PhaseType) \
            and model.structure in fit.POINT_STRUCTURES:
        refit = fit.refitter(model.structure, model.m)
    report = gof.gof_report(data, model, method=args.method,
                            B=args.replicates if args.method == "bootstrap" else None,
                            refit=refit, seed=args.seed)
    doc = {"schema": dataio.SCHEMA, "kind": "gof", "gof": report.to_doc()}
    _write_out(args, dataio.dumps(doc))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "eval": _cmd_eval,
    "fit": _cmd_fit,
    "fit-ocp": _cmd_fit_ocp,
    "sweep": _cmd_sweep,
    "sample": _cmd_sample,
    "gof": _cmd_gof,
    "serve": _cmd_serve,
}


def run(argv) -> int:
    """Execute one invocation; returns the exit code without raising."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except PhasefitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
