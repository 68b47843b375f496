"""Command-line interface.

Subcommands cover the full pipeline: ``simulate`` draws copula samples,
``tau`` and ``plugin`` turn samples into Kendall / plug-in correlation
matrices, ``bounds`` evaluates the closed-form deviation bounds,
``elementary`` and ``refine`` run the two structured estimators, and
``experiment`` drives the Monte Carlo harness from a JSON config.

Matrices travel as plain numeric CSV without headers (full ``%.17g``
precision, lossless for doubles); samples may carry an optional header
row.  Structured results are JSON with sorted keys.

Exit codes: 0 success (for ``experiment``: all enabled assertions passed),
1 assertion failure or numerical failure, 2 malformed input,
3 experiment preconditions unmet (nothing asserted).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .bounds import bound_report
from .elementary import estimate_elementary, mu_threshold
from .exceptions import InfeasibleSpecError, NumericalError
from .harness import ExperimentConfig, run
from .rank_stats import kendall_tau_matrix
from .refined import mu_refined, solve_refined
from .simulator import CopulaSpec, FactorSpec, make_factor_truth, sample
from .transforms import (
    CorrelationMatrix,
    arcsine_transform,
    operator_norm,
    project_psd,
    sine_transform,
)

__all__ = ["cli_main", "main"]


class _InputError(Exception):
    """Malformed user input (file contents, not flags); exits with 2."""


def _read_rows(path: str) -> list:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise _InputError(f"{path}: {exc.strerror or exc}") from exc


def _parse_numeric_rows(path: str, rows: list, start_line: int) -> np.ndarray:
    data = []
    width = None
    for offset, row in enumerate(rows):
        lineno = start_line + offset
        cells = [c for c in row if c.strip() != ""]
        if not cells:
            continue
        try:
            values = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise _InputError(f"{path}:{lineno}: non-numeric cell {bad!r}")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise _InputError(
                f"{path}:{lineno}: expected {width} columns, found {len(values)}"
            )
        data.append(values)
    if not data:
        raise _InputError(f"{path}: no numeric rows found")
    return np.asarray(data, dtype=np.float64)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _read_sample(path: str) -> np.ndarray:
    """Sample CSV: one observation per row, optional header row."""
    rows = _read_rows(path)
    if not rows:
        raise _InputError(f"{path}: empty file")
    first = [c for c in rows[0] if c.strip() != ""]
    if first and not all(_is_float(c) for c in first):
        return _parse_numeric_rows(path, rows[1:], start_line=2)
    return _parse_numeric_rows(path, rows, start_line=1)


def _read_matrix(path: str) -> np.ndarray:
    """Matrix CSV: plain numeric, no header, square."""
    m = _parse_numeric_rows(path, _read_rows(path), start_line=1)
    if m.shape[0] != m.shape[1]:
        raise _InputError(
            f"{path}: expected a square matrix, got shape {m.shape[0]}x{m.shape[1]}"
        )
    return m


def _write_matrix(path: str, m: np.ndarray) -> None:
    np.savetxt(path, np.asarray(m), fmt="%.17g", delimiter=",")


def _emit_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _InputError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise _InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _factor_spec_from_json(obj: dict) -> FactorSpec:
    try:
        return FactorSpec(
            d=obj["d"],
            r=obj["r"],
            factor_eigenvalues=tuple(obj.get("factor_eigenvalues", ())),
            eigenvector_style=obj.get("eigenvector_style", "delocalized_haar"),
            elementary=obj.get("elementary", False),
        )
    except KeyError as exc:
        raise _InputError(f"factor spec missing key {exc.args[0]!r}")


def _copula_spec_from_json(obj: dict, seed_override: int | None) -> CopulaSpec:
    if not isinstance(obj, dict):
        raise _InputError("copula spec must be a JSON object")
    seed = seed_override if seed_override is not None else obj.get("seed", 0)
    if "factor" in obj:
        truth = make_factor_truth(
            _factor_spec_from_json(obj["factor"]),
            rng=np.random.default_rng(seed),
        )
        sigma = truth.sigma
    elif "sigma" in obj:
        sigma = np.asarray(obj["sigma"], dtype=np.float64)
    else:
        raise _InputError("copula spec needs either 'sigma' or 'factor'")
    return CopulaSpec(
        sigma=CorrelationMatrix(values=sigma, provenance="population"),
        generator=obj.get("generator", "gaussian"),
        df=obj.get("df", 3.0),
        marginals=obj.get("marginals", "identity"),
        seed=seed,
    )


def _cmd_tau(args) -> int:
    x = _read_sample(args.input)
    that = kendall_tau_matrix(x)
    _write_matrix(args.output, that.values)
    return 0


def _cmd_plugin(args) -> int:
    x = _read_sample(args.input)
    sigma_hat = sine_transform(kendall_tau_matrix(x))
    if args.psd_project:
        sigma_hat = project_psd(sigma_hat.values)
    _write_matrix(args.output, sigma_hat.values)
    return 0


def _cmd_bounds(args) -> int:
    report = bound_report(
        args.n,
        args.d,
        args.alpha,
        t_norm=args.t_norm,
        that_norm=args.that_norm,
    )
    _emit_json(report.to_dict(), args.output)
    return 0


def _cmd_elementary(args) -> int:
    sigma_hat = _read_matrix(args.input)
    if args.mu is not None:
        mu = args.mu
    else:
        that_norm = operator_norm(arcsine_transform(sigma_hat))
        mu = mu_threshold(that_norm, args.n, sigma_hat.shape[0], args.alpha)
    est = estimate_elementary(sigma_hat, mu)
    payload = {
        "r_hat": est.r_hat,
        "sigma2_hat": est.sigma2_hat,
        "sigma2_negative": est.sigma2_negative,
        "mu_used": est.mu_used,
        "eigenvalues": est.eigenvalues.tolist(),
    }
    _emit_json(payload, args.output)
    if args.theta_output:
        _write_matrix(args.theta_output, est.theta_hat)
    return 0


def _cmd_refine(args) -> int:
    sigma_hat = _read_matrix(args.input)
    if args.mu is not None:
        mu = args.mu
    else:
        that_norm = operator_norm(arcsine_transform(sigma_hat))
        mu = mu_refined(that_norm, args.n, sigma_hat.shape[0], args.alpha)
    result = solve_refined(sigma_hat, mu, tol=args.tol, max_iter=args.max_iter)
    _write_matrix(args.output, result.sigma_tilde.values)
    if args.report:
        payload = {
            "mu": mu,
            "iterations": result.iterations,
            "converged": result.converged,
            "kkt_tangent_residual": result.kkt_tangent_residual,
            "kkt_orthogonal_excess": result.kkt_orthogonal_excess,
            "objective_first": result.objective_trace[0],
            "objective_last": result.objective_trace[-1],
        }
        _emit_json(payload, args.report)
    return 0


def _cmd_simulate(args) -> int:
    spec = _copula_spec_from_json(_load_json(args.spec), args.seed)
    x = sample(spec, args.n)
    if args.header:
        header = ",".join(f"x{j}" for j in range(spec.d))
        np.savetxt(args.output, x.data, fmt="%.17g", delimiter=",",
                   header=header, comments="")
    else:
        _write_matrix_nonsquare(args.output, x.data)
    return 0


def _write_matrix_nonsquare(path: str, m: np.ndarray) -> None:
    np.savetxt(path, np.asarray(m), fmt="%.17g", delimiter=",")


def _cmd_experiment(args) -> int:
    raw = _load_json(args.config)
    try:
        config = ExperimentConfig.from_dict(raw)
    except (ValueError, KeyError, TypeError) as exc:
        raise _InputError(f"{args.config}: {exc}")
    if args.output is not None:
        config.output_path = args.output
    if args.seed is not None:
        config.seed = args.seed
    result = run(config)
    if not config.output_path:
        _emit_json(result.to_dict(), None)
    print(
        f"experiment={result.experiment} status={result.status} "
        f"coverage={result.summary.get('coverage')} "
        f"floor={result.summary.get('probability_floor')}",
        file=sys.stderr,
    )
    if result.status == "pass":
        return 0
    if result.status == "conditions-unmet":
        return 3
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taucorr",
        description="Rank-based correlation estimation: Kendall matrices, "
        "plug-in transforms, deviation bounds, factor-structure estimators "
        "and the Monte Carlo verification harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tau", help="empirical Kendall matrix from a sample CSV")
    p.add_argument("--input", required=True, help="sample CSV (optional header row)")
    p.add_argument("--output", required=True, help="destination CSV for the d x d matrix")
    p.set_defaults(func=_cmd_tau)

    p = sub.add_parser("plugin", help="plug-in correlation matrix from a sample CSV")
    p.add_argument("--input", required=True, help="sample CSV (optional header row)")
    p.add_argument("--output", required=True, help="destination CSV")
    p.add_argument(
        "--psd-project",
        action="store_true",
        help="repair an indefinite plug-in matrix by eigenvalue clipping "
        "and diagonal rescaling",
    )
    p.set_defaults(func=_cmd_plugin)

    p = sub.add_parser("bounds", help="closed-form deviation bounds as JSON")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--d", type=int, required=True, help="dimension")
    p.add_argument("--alpha", type=float, required=True, help="failure probability")
    p.add_argument("--t-norm", type=float, default=None,
                   help="population Kendall operator norm (enables population bounds)")
    p.add_argument("--that-norm", type=float, default=None,
                   help="empirical Kendall operator norm (enables data-driven bounds)")
    p.add_argument("--output", default=None, help="JSON destination (default stdout)")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser(
        "elementary",
        help="spectral rank/noise/low-rank estimate from a plug-in matrix",
    )
    p.add_argument("--input", required=True, help="plug-in correlation matrix CSV")
    p.add_argument("--n", type=int, required=True, help="sample size behind the matrix")
    p.add_argument("--alpha", type=float, required=True,
                   help="failure probability in (0, 1/2)")
    p.add_argument("--mu", type=float, default=None,
                   help="override the data-driven spectral threshold")
    p.add_argument("--output", default=None, help="JSON destination (default stdout)")
    p.add_argument("--theta-output", default=None,
                   help="optional CSV destination for the low-rank part")
    p.set_defaults(func=_cmd_elementary)

    p = sub.add_parser("refine", help="nuclear-norm-refined correlation matrix")
    p.add_argument("--input", required=True, help="plug-in correlation matrix CSV")
    p.add_argument("--n", type=int, required=True, help="sample size behind the matrix")
    p.add_argument("--alpha", type=float, required=True,
                   help="failure probability in (0, 1/2)")
    p.add_argument("--mu", type=float, default=None,
                   help="override the data-driven penalty")
    p.add_argument("--tol", type=float, default=1e-8, help="KKT tolerance scale")
    p.add_argument("--max-iter", type=int, default=10000, help="iteration cap")
    p.add_argument("--output", required=True, help="refined matrix CSV destination")
    p.add_argument("--report", default=None, help="optional solver-report JSON path")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("simulate", help="draw a sample from a copula spec JSON")
    p.add_argument("--spec", required=True,
                   help="JSON with 'sigma' (or 'factor'), 'generator', 'df', "
                   "'marginals', 'seed'")
    p.add_argument("--n", type=int, required=True, help="number of observations")
    p.add_argument("--output", required=True, help="sample CSV destination")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--header", action="store_true", help="write a header row")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment config")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--output", default=None,
                   help="output path stem for <stem>.json and <stem>.csv "
                   "(overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=_cmd_experiment)
    return parser


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, InfeasibleSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
