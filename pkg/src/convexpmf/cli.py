"""Command line interface.

Three subcommands:

* ``fit``: estimate a convex pmf from a file of observations
* ``simulate``: Monte Carlo comparison of the empirical and constrained
  estimators for a named true distribution
* ``certify``: re-check a stored fit against its data file

Exit codes: 0 success, 1 input or validation error, 2 certificate
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from types import SimpleNamespace

import numpy as np

from .diagnostics import certify
from .distributions import parse_distribution
from .harness import (
    ALL_FUNCTIONALS,
    ExperimentSpec,
    result_rows,
    rows_to_csv,
    rows_to_json,
    run_experiment,
)
from .pmf import (
    Pmf,
    TriangularMixture,
    empirical_from_counts,
    empirical_from_samples,
)
from .solver import SolverConfig, SolverError, fit

SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors, which this tool
    # reserves for certificate failures; remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _parse_raw(text: str):
    xs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            value = int(token)
        except ValueError:
            raise ValueError(f"line {lineno}: expected an integer, got {token!r}")
        if value < 0:
            raise ValueError(f"line {lineno}: observations must be nonnegative")
        xs.append(value)
    if not xs:
        raise ValueError("no observations")
    return empirical_from_samples(xs)


def _parse_counts(text: str):
    values, counts = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        if lineno == 1 and token.lower().replace(" ", "") == "value,count":
            continue
        parts = token.split(",")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'value,count', got {token!r}")
        try:
            values.append(int(parts[0]))
            counts.append(int(parts[1]))
        except ValueError:
            raise ValueError(f"line {lineno}: expected two integers, got {token!r}")
    if not values:
        raise ValueError("no observations")
    return empirical_from_counts(values, counts)


def _load_empirical(path: str, fmt: str):
    text = _read_text(path)
    return _parse_raw(text) if fmt == "raw" else _parse_counts(text)


def _write_output(payload: str, out: str):
    if out == "-":
        sys.stdout.write(payload)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(payload)


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    return obj


def _fit_json(emp, result, include_certificate: bool) -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n": emp.n,
        "empirical_pmf": emp.pmf.probs.tolist(),
        "fitted_pmf": result.pmf.probs.tolist(),
        "mixture": {str(j): w for j, w in result.mixture.weights.items()},
        "objective": result.objective,
        "final_L": result.final_L,
    }
    if include_certificate:
        payload["certificate"] = _jsonable(dataclasses.asdict(result.certificate))
        payload["certificate"]["passed"] = result.certificate.passed
    return json.dumps(_jsonable(payload), sort_keys=True) + "\n"


def _fit_csv(emp, result) -> str:
    width = max(len(emp.pmf.probs), len(result.pmf.probs))
    ep = emp.pmf.padded(width)
    fp = result.pmf.padded(width)
    lines = ["i,empirical,fitted"]
    for i in range(width):
        lines.append(f"{i},{float(ep[i])!r},{float(fp[i])!r}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    try:
        emp = _load_empirical(args.input, args.format)
        cfg = SolverConfig(
            d_tol=args.d_tol, mass_tol=args.mass_tol, max_outer=args.max_outer
        )
        result = fit(emp, cfg)
    except (OSError, ValueError, SolverError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    if args.output == "json":
        payload = _fit_json(emp, result, include_certificate=args.certify)
    else:
        payload = _fit_csv(emp, result)
    _write_output(payload, args.out)
    if args.certify and not result.certificate.passed:
        sys.stderr.write(
            "certificate failed: " + ", ".join(result.certificate.violations) + "\n"
        )
        return 2
    return 0


def cmd_simulate(args) -> int:
    try:
        dist = parse_distribution(args.dist)
        sizes = tuple(int(tok) for tok in args.n.split(","))
        functionals = tuple(tok.strip() for tok in args.functionals.split(","))
        spec = ExperimentSpec(
            distribution=dist,
            sample_sizes=sizes,
            replicates=args.replicates,
            seed=args.seed,
            functionals=functionals,
        )
        rows = result_rows(run_experiment(spec))
    except (ValueError, SolverError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    payload = rows_to_json(rows) if args.output == "json" else rows_to_csv(rows)
    _write_output(payload, args.out)
    return 0


def _load_fit_payload(path: str):
    data = json.loads(_read_text(path))
    if not isinstance(data, dict):
        raise ValueError("fit file is not a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema_version {data.get('schema_version')!r}; "
            f"expected {SCHEMA_VERSION}"
        )
    for key in ("fitted_pmf", "mixture", "final_L"):
        if key not in data:
            raise ValueError(f"fit file is missing {key!r}")
    mixture = TriangularMixture({int(j): float(w) for j, w in data["mixture"].items()})
    return SimpleNamespace(
        pmf=Pmf(np.asarray(data["fitted_pmf"], dtype=np.float64)),
        mixture=mixture,
        final_L=int(data["final_L"]),
    )


def cmd_certify(args) -> int:
    try:
        fitres = _load_fit_payload(args.fit_json)
        emp = _load_empirical(args.data, args.format)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    report = certify(fitres, emp)
    payload = _jsonable(dataclasses.asdict(report))
    payload["passed"] = report.passed
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    return 0 if report.passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convexpmf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a convex pmf to observations")
    p_fit.add_argument("input", help="data file")
    p_fit.add_argument("--format", choices=("raw", "counts"), default="raw")
    p_fit.add_argument("--d-tol", type=float, default=SolverConfig.d_tol)
    p_fit.add_argument("--mass-tol", type=float, default=SolverConfig.mass_tol)
    p_fit.add_argument("--max-outer", type=int, default=SolverConfig.max_outer)
    p_fit.add_argument("--output", choices=("json", "csv"), default="json")
    p_fit.add_argument("--certify", action="store_true")
    p_fit.add_argument("--out", default="-", help="output path, '-' for stdout")

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimator comparison")
    p_sim.add_argument("--dist", required=True, help="family:param, e.g. geom:0.5")
    p_sim.add_argument("--n", default="10,100,1000", help="comma separated sizes")
    p_sim.add_argument("--replicates", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--functionals", default=",".join(ALL_FUNCTIONALS))
    p_sim.add_argument("--output", choices=("json", "csv"), default="csv")
    p_sim.add_argument("--out", default="-", help="output path, '-' for stdout")

    p_cert = sub.add_parser("certify", help="re-check a stored fit")
    p_cert.add_argument("fit_json", help="output of convexpmf fit")
    p_cert.add_argument("data", help="data file the fit was computed from")
    p_cert.add_argument("--format", choices=("raw", "counts"), default="raw")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "fit":
        return cmd_fit(args)
    if args.command == "simulate":
        return cmd_simulate(args)
    return cmd_certify(args)


if __name__ == "__main__":
    sys.exit(main())
