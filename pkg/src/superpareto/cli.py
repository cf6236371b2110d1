"""Command-line runner: descriptor or parameter file in, CSV/JSON report out.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import schemas as sc
from .data_io import LossDataError, comonotonic_sum, independent_sum, load_losses
from .dependence import copula_from_dict
from .distributions import Empirical, loss_from_dict
from .dominance import (
    REPORT_COLUMNS,
    CountLaw,
    collective_risk_experiment,
    empirical_fsd,
    one_sided_dominance_test,
    penalty_experiment,
    truncated_penalty_experiment,
)
from .equilibrium import (
    EquilibriumError,
    ExternalMarketSpec,
    InternalMarketSpec,
    best_response_check,
    cost_from_dict,
    es_finite_mean_equilibrium,
    external_equilibrium,
    identity_allocation,
    internal_equilibrium,
    validate_internal_equilibrium,
)
from .portfolio import (
    SUPERADD_COLUMNS,
    Compensation,
    FixedTotal,
    Free,
    PositionProblem,
    UnboundedBelowError,
    evaluate_position,
    optimize_position,
    var_superadditivity_report,
)
from .risk_measures import risk_measure_from_dict
from .rng import RngStream, set_default_threads
from .tail_estimation import HILL_COLUMNS, default_threshold_k, hill_estimator, hill_plot

__all__ = ["main", "Report", "execute", "format_report"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
SUBCOMMAND_KIND = {
    "dominance": "dominance",
    "truncated": "truncated",
    "collective": "collective",
    "portfolio": "portfolio",
    "superadd": "superadd",
    "hill": "hill",
    "empirical": "empirical_compare",
}
MARKETS = {"internal": "equilibrium_internal", "external": "equilibrium_external", "es": "equilibrium_es"}
EQUILIBRIUM_COLUMNS = ("loss", "price")
EMPIRICAL_COLUMNS = ("t", "cdf_comonotone", "cdf_independent", "cdf_gap")
PORTFOLIO_COLUMNS = ("position", "total", "value")


@dataclass
class Report:
    kind: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def headline(self) -> str:
        keys = ("overall", "case", "status", "label", "all_separated", "break_point", "alpha_hat", "value")
        bits = [f"{k}={_cell(self.summary[k])}" for k in keys if k in self.summary]
        return f"{self.kind}: {len(self.rows)} rows" + (" " + " ".join(bits) if bits else "")


# ---------------------------------------------------------------------------
# formatting


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def format_report(report: Report, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns)
        for row in report.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        body = {
            "kind": report.kind,
            "columns": list(report.columns),
            "rows": [_plain(list(r)) for r in report.rows],
            "summary": _plain(report.summary),
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format '{fmt}'")


# ---------------------------------------------------------------------------
# experiment runners


def _load(src: sc.DataSource) -> np.ndarray:
    if src.sample is not None:
        x = np.asarray(src.sample, dtype=float) * src.scale
        if src.nonpositive == "drop":
            x = x[x > 0]
        elif np.any(x <= 0):
            raise LossDataError("inline sample contains nonpositive values")
        if x.size == 0:
            raise LossDataError("inline sample is empty")
        return x
    return load_losses(src.path, src.column, delimiter=src.delimiter, header=src.header,
                       scale=src.scale, nonpositive=src.nonpositive).values


def _grid(g):
    return None if g is None else np.asarray(g, dtype=float)


def execute(kind: str, params: dict[str, Any], seed: int, n_mc: int, threads: int | None = None) -> Report:
    """Validate ``params`` for ``kind`` and run the experiment."""
    p = sc.validate_parameters(kind, params)
    stream = RngStream(int(seed))

    if kind == "dominance":
        rep = penalty_experiment(loss_from_dict(p.marginal), copula_from_dict(p.copula), p.theta, _grid(p.grid),
                                 n_mc, stream, threads, coupled=p.coupled)
        return Report(kind, REPORT_COLUMNS, rep.rows(), rep.summary())

    if kind == "truncated":
        tr = truncated_penalty_experiment(loss_from_dict(p.marginal), copula_from_dict(p.copula), p.theta,
                                          p.c_levels, _grid(p.grid), p.p_levels, n_mc, stream, threads)
        summary = tr.report.summary()
        summary.update(c=tr.c, mismatches=tr.mismatches, checked=tr.checked, identity_holds=tr.identity_holds,
                       var_comparison=[dict(zip(("p", "var_sum", "ci_low", "ci_high", "sum_var", "verdict"), r))
                                       for r in tr.var_comparison.rows()])
        return Report(kind, REPORT_COLUMNS, tr.report.rows(), summary)

    if kind == "collective":
        weight = None if p.weight_law is None else loss_from_dict(p.weight_law)
        avg, tot = collective_risk_experiment(loss_from_dict(p.marginal), weight, CountLaw.from_dict(p.count_law),
                                              _grid(p.grid), n_mc, stream, threads)
        rows = [("average",) + r for r in avg.rows()] + [("weighted_sum",) + r for r in tot.rows()]
        return Report(kind, ("form",) + REPORT_COLUMNS, rows, {"average": avg.summary(), "weighted_sum": tot.summary()})

    if kind == "portfolio":
        c = p.constraint
        constraint = FixedTotal(c.w) if c.kind == "fixed_total" else Free(c.w_max)
        problem = PositionProblem(loss_from_dict(p.marginal), copula_from_dict(p.copula), p.n_assets,
                                  risk_measure_from_dict(p.rho), Compensation(**p.compensation.model_dump()),
                                  constraint)
        res = optimize_position(problem, n_mc, stream.child(0), threads)
        rows = []
        for i, w in enumerate(p.positions):
            val = evaluate_position(problem, w, n_mc, stream.child(1, i), threads)
            rows.append((list(map(float, w)), float(sum(w)), val))
        summary = {"w_opt": res.w_vec, "value": res.value, "certificate": res.certificate}
        return Report(kind, PORTFOLIO_COLUMNS, rows, summary)

    if kind == "superadd":
        rep = var_superadditivity_report([loss_from_dict(d) for d in p.losses], p.theta, p.p_grid,
                                         n_mc, stream, threads)
        return Report(kind, SUPERADD_COLUMNS, rep.rows(), rep.summary())

    if kind == "equilibrium_internal":
        if p.risk_values is not None:
            spec = InternalMarketSpec(p.a, p.risk_values, [cost_from_dict(c) for c in p.costs])
        else:
            spec = InternalMarketSpec.from_measures(p.a, [risk_measure_from_dict(r) for r in p.rho],
                                                    loss_from_dict(p.marginal), [cost_from_dict(c) for c in p.costs])
        res = internal_equilibrium(spec)
        if p.price is not None:
            res.diagnostics["validation_at_price"] = validate_internal_equilibrium(
                spec, np.full(spec.n, p.price), identity_allocation(spec))
        return _equilibrium_report(kind, res)

    if kind == "equilibrium_external":
        spec = ExternalMarketSpec(p.n, p.k, p.a, p.rho_i, p.rho_e, cost_from_dict(p.cost_i), cost_from_dict(p.cost_e))
        res = external_equilibrium(spec, p.tol)
        res.diagnostics["best_response"] = best_response_check(spec, res)
        return _equilibrium_report(kind, res)

    if kind == "equilibrium_es":
        res = es_finite_mean_equilibrium(p.a, loss_from_dict(p.marginal), p.q, n_mc, stream, threads)
        return _equilibrium_report(kind, res)

    if kind == "hill":
        x = _load(p.data)
        if p.k_min is not None:
            results = hill_plot(x, p.k_min, p.k_max)
            summary: dict[str, Any] = {"n": int(x.size), "k_min": p.k_min, "k_max": p.k_max}
        else:
            k = p.k if p.k is not None else default_threshold_k(x)
            r = hill_estimator(x, k)
            results = [r]
            summary = {"n": int(x.size), **r.to_dict()}
        return Report(kind, HILL_COLUMNS, [r.row() for r in results], summary)

    if kind == "empirical_compare":
        f1, f2 = Empirical(_load(p.first)), Empirical(_load(p.second))
        como = comonotonic_sum(f1, f2).sample(p.n_out, stream.child(0), threads)
        indep = independent_sum(f1, f2, p.n_out, stream.child(1), threads)
        rep = empirical_fsd(como, indep)
        fa = 1.0 - rep.rhs_exceed
        fb = 1.0 - rep.lhs_exceed
        rows = list(zip(rep.grid.tolist(), fa.tolist(), fb.tolist(), rep.cdf_gap.tolist()))
        summary = {k: v for k, v in rep.summary().items() if k != "cdf_gap"}
        summary["comparison"] = "comonotonic sum <=_st independent sum"
        if p.test:
            summary["p_value"] = one_sided_dominance_test(como, indep, p.n_boot, stream.child(2))
        return Report(kind, EMPIRICAL_COLUMNS, rows, summary)

    raise sc.DescriptorError(f"unknown kind '{kind}'")


def _equilibrium_report(kind: str, res) -> Report:
    rows = [(i, float(x)) for i, x in enumerate(res.price)]
    summary = res.to_dict()
    if "status" in res.diagnostics:
        summary["status"] = res.diagnostics["status"]
    return Report(kind, EQUILIBRIUM_COLUMNS, rows, summary)


# ---------------------------------------------------------------------------
# argument parsing


def _global_flags() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, help="64-bit seed (mandatory unless the descriptor has one)")
    g.add_argument("--n-mc", type=int, dest="n_mc", help="Monte Carlo sample size")
    g.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    g.add_argument("--out", help="output file (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=None, help="report format (default csv)")
    return g


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    ap = argparse.ArgumentParser(prog="superpareto", description="Super-Pareto diversification experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[flags], help="run a full experiment descriptor")
    r.add_argument("descriptor", help="descriptor JSON file")

    for name, kind in SUBCOMMAND_KIND.items():
        s = sub.add_parser(name, parents=[flags], help=f"{kind} experiment from a parameter file")
        s.add_argument("params", help="parameter JSON file")

    e = sub.add_parser("equilibrium", parents=[flags], help="market equilibrium from a parameter file")
    e.add_argument("params", help="parameter JSON file")
    e.add_argument("--market", choices=tuple(MARKETS), required=True)

    x = sub.add_parser("example", help="print an example descriptor")
    x.add_argument("kind", choices=sc.KINDS)
    x.add_argument("--seed", type=int, default=20240101)

    s = sub.add_parser("schema", help="write the JSON schema files")
    s.add_argument("--dir", default="schemas")
    return ap


def _read_json(path: str) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise sc.DescriptorError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise sc.DescriptorError(f"{path} is not valid JSON: {exc}") from None


def _resolve(args) -> tuple[str, dict[str, Any], int, int, str | None]:
    if args.command == "run":
        raw = _read_json(args.descriptor)
        if isinstance(raw, dict):
            if args.seed is not None:
                raw["seed"] = args.seed
            if args.n_mc is not None:
                raw["n_mc"] = args.n_mc
        d = sc.parse_descriptor(raw)
        return d.kind, d.parameters, d.seed, d.n_mc, args.out or d.output
    kind = MARKETS[args.market] if args.command == "equilibrium" else SUBCOMMAND_KIND[args.command]
    params = _read_json(args.params)
    if args.seed is None:
        raise sc.DescriptorError("--seed is required")
    n_mc = args.n_mc if args.n_mc is not None else 10**6
    d = sc.parse_descriptor({"kind": kind, "parameters": params, "seed": args.seed, "n_mc": n_mc})
    return d.kind, d.parameters, d.seed, d.n_mc, args.out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "example":
        print(json.dumps(sc.example_descriptor(args.kind, seed=args.seed), indent=2, sort_keys=True))
        return EXIT_OK
    if args.command == "schema":
        for path in sc.write_schemas(args.dir):
            print(path)
        return EXIT_OK

    try:
        if args.threads is not None and args.threads < 1:
            raise sc.DescriptorError("--threads must be >= 1")
        set_default_threads(args.threads)
        kind, params, seed, n_mc, out = _resolve(args)
        fmt = args.format or ("json" if out and out.endswith(".json") else "csv")
        report = execute(kind, params, seed, n_mc, args.threads)
        text = format_report(report, fmt)
    except (sc.DescriptorError, LossDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EquilibriumError, UnboundedBelowError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    print(report.headline(), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
