"""Command-line front end.

Two subcommands: ``estimate`` runs the estimators on a pair of GWAS
summary-statistic files, ``simulate`` runs a Monte Carlo study. All numeric
output uses the shortest round-trip decimal representation, and every run
writes a sidecar manifest (``<out>.manifest.json``) recording the resolved
configuration; result files contain nothing time-dependent, so repeated runs
are byte-identical.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DegenerateFitError,
    MrQuantileError,
    TooManyFailedReplicatesError,
)
from .estimators import (
    BootstrapConfig,
    EstimateReport,
    SolverConfig,
    bootstrap_se,
    fit_egger,
    fit_ivw,
    fit_mr_quantile,
    METHODS,
)
from .ratios import compute_ratios, quantile_weights
from .simulation import StrongSimConfig, WeakSimConfig, run_study
from .summary_data import harmonize, parse_gwas_file
from .wqr import check_loss

DENSITY_GRID_POINTS = 512


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)]
    lines.extend("\t".join(_fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


def _write_manifest(out: Path, command: str, config: dict, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "tool": {"name": "mrquantile", "version": __version__},
        "timestamp": _timestamp(),
        "config": config,
        "outputs": outputs,
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _parse_cols(spec: str | None) -> dict[str, str]:
    """Parse ``snp=SNP,beta=BETA``-style column overrides."""
    if not spec:
        return {}
    mapping = {}
    for item in spec.split(","):
        if "=" not in item:
            raise ValueError(f"bad column mapping {item!r}; expected name=column")
        key, _, value = item.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def _parse_methods(spec: str) -> tuple[str, ...]:
    methods = tuple(m.strip() for m in spec.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrquantile",
        description="Two-sample Mendelian randomization with quantile-based estimation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate causal effects from GWAS summary statistics")
    est.add_argument("--exposure", required=True, help="exposure summary-statistics file")
    est.add_argument("--outcome", required=True, help="outcome summary-statistics file")
    est.add_argument("--methods", default=",".join(METHODS),
                     help="comma-separated subset of: " + ", ".join(METHODS))
    est.add_argument("--pval-threshold", type=float, default=5e-8,
                     help="exposure significance threshold (default 5e-8)")
    est.add_argument("--outcome-type", choices=("continuous", "binary-rare"),
                     default="continuous")
    est.add_argument("--boot", type=int, default=1000, help="bootstrap replicates (default 1000)")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--alpha", type=float, default=0.05)
    est.add_argument("--ci", choices=("normal", "percentile"), default="normal",
                     help="bootstrap CI construction (default normal)")
    est.add_argument("--min-abs-beta-x", type=float, default=0.0,
                     help="drop instruments with |exposure beta| at or below this")
    est.add_argument("--exposure-cols", default=None,
                     help="column overrides, e.g. snp=rsid,beta=b,se=stderr,pvalue=p")
    est.add_argument("--outcome-cols", default=None)
    est.add_argument("--delimiter", choices=("tab", "comma"), default=None,
                     help="override the extension-based delimiter guess")
    est.add_argument("--out", required=True, help="report path")
    est.add_argument("--format", choices=("json", "tsv"), default="json")
    est.add_argument("--diagnostics", default=None,
                     help="write per-variant diagnostics TSV (plus .density.tsv) here")
    est.add_argument("--threads", type=int, default=1)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--design", choices=("strong", "weak"), required=True)
    sim.add_argument("--n", type=int, default=50_000)
    sim.add_argument("--p", type=int, default=None,
                     help="number of variants (default 30 strong, 50 weak)")
    sim.add_argument("--scenario", choices=("no_pleiotropy", "uncorrelated", "correlated"),
                     default="no_pleiotropy", help="strong design only")
    sim.add_argument("--q", type=float, default=0.0,
                     help="invalid fraction (strong design only)")
    sim.add_argument("--theta0", type=float, default=0.0, help="strong-design causal effect")
    sim.add_argument("--beta-xu", type=float, default=1.0)
    sim.add_argument("--beta-yu", type=float, default=1.0)
    sim.add_argument("--m", type=int, default=30, help="invalid count (weak design only)")
    sim.add_argument("--h-y2", type=float, default=0.2, help="weak design only")
    sim.add_argument("--h-u2", type=float, default=0.0, help="weak design only")
    sim.add_argument("--h-x2", type=float, default=0.5, help="weak design only")
    sim.add_argument("--theta", type=float, default=0.0, help="weak-design causal effect")
    sim.add_argument("--reps", type=int, required=True)
    sim.add_argument("--methods", default="mr_quantile,ivw")
    sim.add_argument("--boot", type=int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--out", required=True, help="per-replicate table path")
    sim.add_argument("--threads", type=int, default=1)
    return parser


def _report_dict(report: EstimateReport) -> dict:
    out = {
        "method": report.method,
        "theta_hat": report.theta_hat,
        "se": report.se,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "alpha_level": report.alpha_level,
        "n_instruments": report.n_instruments,
    }
    if report.rr_scale is not None:
        out.update(report.rr_scale)
    if report.extras:
        out["extras"] = dict(report.extras)
    return out


_TSV_COLUMNS = [
    "method", "theta_hat", "se", "ci_low", "ci_high", "alpha_level",
    "n_instruments", "rr", "rr_ci_low", "rr_ci_high",
    "tau_hat", "lambda_hat", "converged", "iterations", "n_boot_failed",
    "intercept", "intercept_se",
]


def _report_row(report: EstimateReport) -> list:
    base = _report_dict(report)
    flat = {**base, **base.pop("extras", {})}
    return [flat.get(col) for col in _TSV_COLUMNS]


def _write_diagnostics(path: Path, rs, fit) -> list[str]:
    weights = quantile_weights(rs)
    se_ratio = np.sqrt(rs.var_ratio)
    rows = [
        [rs.snp_ids[i], float(rs.ratio[i]), float(se_ratio[i]),
         float(weights[i]), float(fit.std_residuals[i])]
        for i in range(len(rs.snp_ids))
    ]
    _write_tsv(path, ["snp_id", "ratio", "se_ratio", "weight", "std_residual"], rows)

    tau = fit.params.tau
    resid = fit.std_residuals
    grid = np.linspace(float(np.min(resid)) - 1.0, float(np.max(resid)) + 1.0,
                       DENSITY_GRID_POINTS)
    density = tau * (1.0 - tau) * np.exp(-check_loss(grid, tau))
    density_path = Path(str(path) + ".density.tsv")
    _write_tsv(density_path, ["std_residual", "ald_density"],
               [[float(g), float(d)] for g, d in zip(grid, density)])
    return [str(path), str(density_path)]


def cmd_estimate(args: argparse.Namespace) -> int:
    delimiter = {"tab": "\t", "comma": ","}.get(args.delimiter)
    methods = _parse_methods(args.methods)
    outcome_type = args.outcome_type.replace("-", "_")

    exposure = parse_gwas_file(args.exposure, _parse_cols(args.exposure_cols), delimiter)
    outcome = parse_gwas_file(args.outcome, _parse_cols(args.outcome_cols), delimiter)
    data = harmonize(
        exposure, outcome,
        pval_threshold=args.pval_threshold,
        outcome_type=outcome_type,
        exposure_path=args.exposure,
        outcome_path=args.outcome,
    )
    rs = compute_ratios(data, args.min_abs_beta_x)
    solver = SolverConfig()
    boot = BootstrapConfig(n_boot=args.boot, seed=args.seed, alpha_level=args.alpha)

    reports: dict[str, EstimateReport] = {}
    for method in methods:
        if method == "ivw":
            reports[method] = fit_ivw(rs, alpha_level=args.alpha)
        elif method == "egger":
            reports[method] = fit_egger(rs.source, alpha_level=args.alpha)
        else:
            reports[method] = bootstrap_se(
                data, method, solver, boot,
                ci_method=args.ci, min_abs_beta_x=args.min_abs_beta_x,
            )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    prov = data.provenance
    harmonization = {
        "n_instruments": len(rs.ratio),
        "n_exposure_pass": prov.n_exposure_pass,
        "retained": prov.retained,
        "dropped_no_match": prov.dropped_no_match,
        "dropped_mismatch": prov.dropped_mismatch,
        "dropped_palindromic": prov.dropped_palindromic,
        "duplicate_exposure": prov.duplicate_exposure,
        "duplicate_outcome": prov.duplicate_outcome,
        "dropped_weak_instrument": rs.n_dropped,
    }
    if args.format == "json":
        payload = {
            "tool": {"name": "mrquantile", "version": __version__},
            "inputs": {
                "exposure": args.exposure,
                "outcome": args.outcome,
                "pval_threshold": args.pval_threshold,
                "outcome_type": outcome_type,
            },
            "harmonization": harmonization,
            "estimates": {m: _report_dict(r) for m, r in reports.items()},
        }
        out.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        _write_tsv(out, _TSV_COLUMNS, [_report_row(reports[m]) for m in methods])

    outputs = [str(out)]
    if args.diagnostics:
        fit = fit_mr_quantile(rs, solver)
        outputs += _write_diagnostics(Path(args.diagnostics), rs, fit)

    config = {
        "exposure": args.exposure, "outcome": args.outcome,
        "methods": list(methods), "pval_threshold": args.pval_threshold,
        "outcome_type": outcome_type, "boot": args.boot, "seed": args.seed,
        "alpha": args.alpha, "ci": args.ci, "min_abs_beta_x": args.min_abs_beta_x,
        "exposure_cols": args.exposure_cols, "outcome_cols": args.outcome_cols,
        "delimiter": args.delimiter, "format": args.format,
        "diagnostics": args.diagnostics,
    }
    _write_manifest(out, "estimate", config, outputs)
    print(f"wrote {', '.join(outputs)}")
    return 0


_SIM_COLUMNS = ["rep", "method", "theta_hat", "se", "reject", "converged", "error"]
_AGG_COLUMNS = ["method", "n_fit", "n_failed", "bias", "sd", "rmse", "rejection_rate"]


def cmd_simulate(args: argparse.Namespace) -> int:
    methods = _parse_methods(args.methods)
    if args.design == "strong":
        design = StrongSimConfig(
            n=args.n, p=args.p if args.p is not None else 30,
            scenario=args.scenario, q=args.q, theta0=args.theta0,
            beta_xu=args.beta_xu, beta_yu=args.beta_yu, seed=args.seed,
        )
    else:
        design = WeakSimConfig(
            n=args.n, p=args.p if args.p is not None else 50, m=args.m,
            h_y2=args.h_y2, h_u2=args.h_u2, h_x2=args.h_x2,
            theta=args.theta, seed=args.seed,
        )
    boot = BootstrapConfig(n_boot=args.boot, seed=args.seed, alpha_level=args.alpha)
    result = run_study(design, methods, R=args.reps, boot=boot, threads=args.threads)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        [r.rep, r.method, r.theta_hat, r.se, r.reject, r.converged, r.error or ""]
        for r in result.per_replicate
    ]
    _write_tsv(out, _SIM_COLUMNS, rows)
    summary_path = Path(str(out) + ".summary.tsv")
    agg_rows = [
        [a.method, a.n_fit, a.n_failed, a.bias, a.sd, a.rmse, a.rejection_rate]
        for a in (result.aggregates[m] for m in methods)
    ]
    _write_tsv(summary_path, _AGG_COLUMNS, agg_rows)

    config = dict(result.design)
    config.update({
        "reps": args.reps, "methods": list(methods), "boot": args.boot,
        "alpha": args.alpha, "moment_convention": result.moment_convention,
    })
    _write_manifest(out, "simulate", config, [str(out), str(summary_path)])
    print(f"wrote {out}, {summary_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return cmd_estimate(args)
        return cmd_simulate(args)
    except (DegenerateFitError, TooManyFailedReplicatesError, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (MrQuantileError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
