"""Command-line driver: ``memcalib simulate | estimate | check-constraint``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure (solver failure under ``--strict``, or a violated
``--tolerance`` in check-constraint).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import curves_io
from .calib_chisq import FunctionalWeights, MeanTarget, SingularMatrixError, chisq_weights, weighted_mean
from .core import Kernel, kernel_matrix, make_grids
from .curves_io import CurveTable, read_curves, write_curves, write_rows
from .mem_core import MemContext, calibrated_aux_mean
from .mem_gaussian import DEFAULT_RCOND, mem_gaussian_weights
from .mem_poisson import MomentRangeError, PoissonPrior, PoissonSolveOptions, mem_poisson_weights
from .sampling import DimensionError, FunctionalSample, SamplingDesign, ht_functional_mean
from .simulation import SimConfig, monte_carlo

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
METHODS = ("ht", "chisq", "mem-gauss", "mem-poisson")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memcalib", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run the Monte Carlo comparison")
    sim.add_argument("--config", help="JSON file with SimConfig keys")
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--chisq", action="store_true", help="also run chi-square calibration")
    sim.add_argument("--strict", action="store_true", help="exit 3 if a Poisson solve fails")

    est = sub.add_parser("estimate", help="estimate a mean curve from sample files")
    est.add_argument("--sample-y", required=True)
    est.add_argument("--sample-x", required=True, nargs="+", help="one CSV per auxiliary variable")
    est.add_argument("--mu-x", required=True, help="CSV with one row per auxiliary variable")
    est.add_argument("--design", required=True, help='JSON: {"N": ..., "pi": [...]} or {"N": ..., "n": ...}')
    est.add_argument("--method", required=True, choices=METHODS)
    est.add_argument("--out", required=True)
    est.add_argument("--J", type=int, default=50, help="number of s-grid points")
    est.add_argument("--kernel-sigma2", type=float, default=0.5)
    est.add_argument("--rcond", type=float, default=DEFAULT_RCOND)
    est.add_argument("--gamma", type=float, default=1.0)
    est.add_argument("--jump-min", type=float, default=-1.0)
    est.add_argument("--jump-max", type=float, default=1.0)
    est.add_argument("--quadrature-order", type=int, default=40)
    est.add_argument("--residual-tolerance", type=float, default=1e-6)
    est.add_argument("--max-iterations", type=int, default=500)
    est.add_argument("--full-system", action="store_true",
                     help="solve the Poisson system without subspace truncation")
    est.add_argument("--strict", action="store_true")

    chk = sub.add_parser("check-constraint", help="report calibration-constraint violations")
    chk.add_argument("--weights", required=True)
    chk.add_argument("--sample-x", required=True, nargs="+")
    chk.add_argument("--mu-x", required=True)
    chk.add_argument("--population-size", required=True, type=int)
    chk.add_argument("--tolerance", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"simulate": _simulate, "estimate": _estimate, "check-constraint": _check}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"memcalib: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, curves_io.CurveFileError, DimensionError, SingularMatrixError) as exc:
        print(f"memcalib: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (MomentRangeError, np.linalg.LinAlgError) as exc:
        print(f"memcalib: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _load_config(args) -> SimConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
    if args.reps is not None:
        data["reps"] = args.reps
    if args.seed is not None:
        data["seed"] = args.seed
    if args.chisq:
        est = list(data.get("estimators", SimConfig.estimators))
        data["estimators"] = est + ["chisq"] if "chisq" not in est else est
    try:
        return SimConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _simulate(args) -> int:
    config = _load_config(args)
    result = monte_carlo(config)
    os.makedirs(args.out, exist_ok=True)
    out = lambda name: os.path.join(args.out, name)  # noqa: E731

    with open(out("config.json"), "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_rows(out("decomposition.csv"), ["estimator", "mse", "bias2", "variance"],
               [(r.estimator, r.mse, r.bias2, r.variance) for r in result.rows])

    t = make_grids(config.J, config.L).t_points
    means = result.mean_curves()
    truth = result.truth if result.truth.ndim == 1 else result.truth.mean(axis=0)
    write_curves(CurveTable(t, ("population",) + tuple(means), np.vstack([truth, *means.values()])),
                 out("mean_curves.csv"))
    for method, est in result.estimates.items():
        ids = tuple(f"rep_{r + 1}" for r in range(config.reps))
        write_curves(CurveTable(t, ids, est), out(f"replicates_{method}.csv"))

    # calibration check of the first replication
    first = result.replications[0]
    for method, cal in first.calibrated_x.items():
        q = cal.shape[1]
        ids = tuple(f"mu_x_{k + 1}" for k in range(q)) + tuple(f"calibrated_{k + 1}" for k in range(q))
        write_curves(CurveTable(t, ids, np.vstack([result.mu_x.T, cal.T])), out(f"constraint_{method}.csv"))

    keys = sorted({k for rep in result.replications for k in rep.diagnostics})
    if keys:
        write_rows(out("diagnostics.csv"), ["replication"] + keys,
                   [[r + 1] + [_cell(rep.diagnostics.get(k, "")) for k in keys]
                    for r, rep in enumerate(result.replications)])

    for row in result.rows:
        print(f"{row.estimator:12s} mse={row.mse:.6g} bias2={row.bias2:.6g} variance={row.variance:.6g}")
    failed = sum(1 for rep in result.replications if rep.diagnostics.get("poisson_stationary") is False)
    if failed:
        print(f"warning: {failed} Poisson solve(s) did not reach the tolerance", file=sys.stderr)
        if args.strict:
            return EXIT_NUMERIC
    return EXIT_OK


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return v


def _aux_tables(paths, reference: CurveTable | None = None):
    tables = [read_curves(p) for p in paths]
    ref = reference or tables[0]
    for path, tab in zip(paths, tables):
        if not np.array_equal(tab.t, ref.t):
            raise DimensionError(f"{path}: time grid differs from the reference file")
        if tab.ids != ref.ids:
            raise DimensionError(f"{path}: unit ids differ from the reference file")
    return np.stack([tab.values for tab in tables], axis=-1)


def _mu_x(path, t, q) -> np.ndarray:
    tab = read_curves(path)
    if not np.array_equal(tab.t, t):
        raise DimensionError(f"{path}: time grid differs from the sample files")
    if tab.values.shape[0] != q:
        raise DimensionError(f"{path}: {tab.values.shape[0]} rows for {q} auxiliary variables")
    return tab.values.T


def _design(path, n) -> SamplingDesign:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise curves_io.CurveFileError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict) or "N" not in raw:
        raise curves_io.CurveFileError(f'{path}: design needs at least the key "N"')
    N = raw["N"]
    try:
        if "pi" in raw:
            design = SamplingDesign.from_pi(N, raw["pi"])
        else:
            if raw.get("n", n) != n:
                raise ValueError(f"design n={raw['n']} but the sample has {n} units")
            design = SamplingDesign.from_pi(N, np.full(n, n / N))
    except (TypeError, ValueError) as exc:
        raise curves_io.CurveFileError(f"{path}: {exc}") from None
    if design.n != n:
        raise DimensionError(f"{path}: {design.n} inclusion probabilities for {n} sampled units")
    return design


def _estimate(args) -> int:
    ytab = read_curves(args.sample_y)
    x = _aux_tables(args.sample_x, ytab)
    sample = FunctionalSample(ytab.values, x, ytab.ids)
    design = _design(args.design, sample.n)
    target = MeanTarget(_mu_x(args.mu_x, ytab.t, sample.q), design.N)
    os.makedirs(args.out, exist_ok=True)

    status = EXIT_OK
    if args.method == "ht":
        weights = FunctionalWeights(np.repeat(design.d[:, None], sample.L, axis=1), "ht")
        estimate = ht_functional_mean(sample, design)
    elif args.method == "chisq":
        weights = chisq_weights(sample, design, target)
        estimate = weighted_mean(weights, sample, design.N)
    else:
        try:
            grids = make_grids(args.J, sample.L)
            km = kernel_matrix(Kernel(args.kernel_sigma2), grids)
            ctx = MemContext(sample, design, target, km, grids)
            if args.method == "mem-gauss":
                weights, sol = mem_gaussian_weights(ctx, args.rcond)
                print(f"effective rank {sol.effective_rank}, constraint max |r| {sol.constraint_max_abs:.6g}")
            else:
                prior = PoissonPrior(args.gamma, args.jump_min, args.jump_max, args.quadrature_order)
                opts = PoissonSolveOptions(
                    max_iterations=args.max_iterations,
                    residual_tolerance=args.residual_tolerance,
                    subspace_rcond=None if args.full_system else args.rcond,
                )
                weights, sol = mem_poisson_weights(ctx, prior, opts)
                print(f"iterations {sol.iterations}, stationary {sol.stationary}, "
                      f"constraint max |r| {sol.residual_inf_norm:.6g}")
                if not sol.stationary:
                    print("warning: Poisson solver did not reach the tolerance", file=sys.stderr)
                    if args.strict:
                        status = EXIT_NUMERIC
        except ValueError as exc:
            if isinstance(exc, (DimensionError, curves_io.CurveFileError)):
                raise
            raise UsageError(str(exc)) from None
        estimate = weighted_mean(weights, sample, design.N)

    write_curves(CurveTable(ytab.t, (args.method,), estimate), os.path.join(args.out, "estimate.csv"))
    write_curves(CurveTable(ytab.t, sample.ids, weights.w), os.path.join(args.out, "weights.csv"))
    cal = calibrated_aux_mean(weights, sample, design.N)
    q = sample.q
    ids = tuple(f"mu_x_{k + 1}" for k in range(q)) + tuple(f"calibrated_{k + 1}" for k in range(q))
    write_curves(CurveTable(ytab.t, ids, np.vstack([target.mu_x.T, cal.T])),
                 os.path.join(args.out, "constraint.csv"))
    return status


def _check(args) -> int:
    wtab = read_curves(args.weights)
    x = _aux_tables(args.sample_x, wtab)
    q = x.shape[2]
    mu_x = _mu_x(args.mu_x, wtab.t, q)
    if args.population_size < 1:
        raise UsageError("--population-size must be positive")
    cal = np.einsum("il,ilk->lk", wtab.values, x) / args.population_size
    dev = np.abs(cal - mu_x).max(axis=0)
    for k, v in enumerate(dev, start=1):
        print(f"x{k}: max |N^-1 sum w X - mu_X| = {v:.6g}")
    if args.tolerance is not None and dev.max() > args.tolerance:
        print(f"constraint violated beyond tolerance {args.tolerance:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
