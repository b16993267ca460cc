import argparse
import logging
import sys

import numpy as np
import pandas as pd

from scripts.asymptotics import LIMIT, PERTURBED, LaplaceExpansion, gaussian_moment_diag, gaussian_moment_wick
from scripts.critpoint import CriticalConfig, CriticalPointAnalyzer
from scripts.exceptions import LaplaceAsymError
from scripts.harness import ExperimentConfig, ExperimentRunner, emit_table, n_grid
from scripts.logger import SetupLogger
from scripts.oracle import QuadratureConfig, QuadratureOracle, gaussian_moment_quadrature
from scripts.problem_io import read_problem
from scripts.suite import SUITE_N, AcceptanceSuite
from scripts.symmat import SymMatrix

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2
LIST_OPTIONS = ("--eigs", "--beta", "--n")


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _attach_list_values(argv: list) -> list:
    """Join each list option with its value: ``--eigs -1,-3`` becomes ``--eigs=-1,-3``."""
    joined, i = [], 0
    while i < len(argv):
        token = argv[i]
        if token in LIST_OPTIONS and i + 1 < len(argv):
            joined.append(f"{token}={argv[i + 1]}")
            i += 2
        else:
            joined.append(token)
            i += 1
    return joined


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laplace-asym",
        description="Higher-order Laplace asymptotics with vanishing phase perturbations.",
    )
    parser.add_argument("--log-file", default="logs/laplace_asym.log", help="Log file path.")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--verbose", action="store_true", help="Mirror log records to stderr.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", choices=["csv", "json"], default="csv", help="Table format.")
    common.add_argument("--output", default=None, help="Write the table here instead of stdout.")

    verify = sub.add_parser("verify", help="Assumption report for a problem file.", parents=[common])
    verify.add_argument("--problem", required=True)
    verify.add_argument("--n", type=_int_list, default=[64, 1024, 16384], help="Comma-separated n to track.")
    verify.add_argument("--grid", type=int, default=41, help="Grid nodes per axis.")

    approx = sub.add_parser("approx", help="Leading-order approximation of I_n.", parents=[common])
    approx.add_argument("--problem", required=True)
    approx.add_argument("--n", type=int, required=True)
    approx.add_argument("--variant", choices=[LIMIT, PERTURBED], default=LIMIT)

    oracle = sub.add_parser("oracle", help="Quadrature reference value of I_n.", parents=[common])
    oracle.add_argument("--problem", required=True)
    oracle.add_argument("--n", type=int, required=True)
    oracle.add_argument("--rel-tol", type=float, default=1e-10)
    oracle.add_argument("--base-order", type=int, default=32)

    for name, help_text in (("rates", "Theorem experiment over a range of n."),
                            ("lemmas", "Drift rates of c_n, determinant and eigenvalues.")):
        cmd = sub.add_parser(name, help=help_text, parents=[common])
        cmd.add_argument("--problem", required=True)
        cmd.add_argument("--n-min", type=int, required=True)
        cmd.add_argument("--n-max", type=int, required=True)
        cmd.add_argument("--points", type=int, required=True)
        cmd.add_argument("--geom", action="store_true", help="Geometric instead of linear spacing.")
        cmd.add_argument("--workers", type=int, default=None)
        if name == "rates":
            cmd.add_argument("--rel-tol", type=float, default=1e-10)

    moments = sub.add_parser(
        "moments", help="Gaussian moments: diagonal formula against Wick pairings.", parents=[common]
    )
    moments.add_argument("--dim", type=int, required=True)
    moments.add_argument("--beta", type=_int_list, required=True)
    moments.add_argument("--eigs", type=_float_list, required=True)
    moments.add_argument("--matrix", default=None, help="Whitespace-separated d x d matrix for the Wick value.")
    moments.add_argument("--quadrature", action="store_true", help="Also integrate by tensor quadrature.")

    suite = sub.add_parser("suite", help="Run the built-in acceptance suite.", parents=[common])
    suite.add_argument("--export", default=None, metavar="DIR", help="Write the suite problems to DIR and exit.")
    suite.add_argument("--n", type=_int_list, default=None, help="Comma-separated n (default 2^6..2^16).")
    suite.add_argument("--workers", type=int, default=None)
    return parser


def _emit(args, table: pd.DataFrame, summary: dict = None, line: str = None):
    text = emit_table(table, args.out, args.output, summary)
    if args.output is None:
        print(text.rstrip("\n"))
    else:
        print(f"Wrote {args.output}")
    if line and (args.out == "csv" or args.output is not None):
        print(line)


def _runner(args, logger, quadrature_config: QuadratureConfig = None) -> ExperimentRunner:
    """Experiment runner whose n cells and assumption grids both honour --workers."""
    return ExperimentRunner(
        quadrature_config=quadrature_config,
        critical_config=CriticalConfig(workers=args.workers),
        experiment_config=ExperimentConfig(workers=args.workers),
        logger=logger,
    )


def cmd_verify(args, logger) -> int:
    prob = read_problem(args.problem, logger)
    report = CriticalPointAnalyzer(prob, logger=logger).verify_assumptions(args.n, args.grid)
    _emit(args, report.flags_frame(), report.summary(),
          f"{prob.name}: {'passed' if report.passed else 'FAILED ' + ','.join(report.hard_failures)}")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_approx(args, logger) -> int:
    prob = read_problem(args.problem, logger)
    report = CriticalPointAnalyzer(prob, logger=logger).verify_assumptions([args.n])
    expansion = LaplaceExpansion(prob, report, logger)
    log_scale, mantissa = expansion.approx_I(args.n, args.variant)
    table = pd.DataFrame([{"n": args.n, "log_scale": log_scale, "mantissa": mantissa}])
    summary = {
        "K": expansion.K, "classical_K": expansion.classical_K, "exponent": expansion.exponent,
        "variant": args.variant, "status": expansion.status,
    }
    _emit(args, table, summary, f"K = {expansion.K:.15g}, status {expansion.status}")
    return EXIT_OK


def cmd_oracle(args, logger) -> int:
    prob = read_problem(args.problem, logger)
    cfg = QuadratureConfig(base_order=args.base_order, rel_tol=args.rel_tol)
    result = QuadratureOracle(prob, cfg, logger).reference_integral(args.n)
    _emit(args, pd.DataFrame([result.to_dict()]), None,
          None if result.converged else "warning: oracle did not converge")
    return EXIT_OK


def cmd_rates(args, logger) -> int:
    prob = read_problem(args.problem, logger)
    ns = n_grid(args.n_min, args.n_max, args.points, geometric=args.geom)
    runner = _runner(args, logger, QuadratureConfig(rel_tol=args.rel_tol))
    experiment = runner.run_theorem_experiment(prob, ns)
    _emit(args, experiment.table, experiment.summary(), experiment.summary_line())
    return EXIT_OK


def cmd_lemmas(args, logger) -> int:
    prob = read_problem(args.problem, logger)
    ns = n_grid(args.n_min, args.n_max, args.points, geometric=args.geom)
    result = _runner(args, logger).run_lemma_suite(prob, ns)
    _emit(args, result.table, result.summary(), result.summary_line())
    return EXIT_OK


def cmd_moments(args, logger) -> int:
    if len(args.beta) != args.dim or len(args.eigs) != args.dim:
        raise ValueError(f"--beta and --eigs need exactly {args.dim} entries.")
    if args.matrix:
        matrix = SymMatrix(np.loadtxt(args.matrix, ndmin=2))
    else:
        matrix = SymMatrix.diag(args.eigs)
    if matrix.dim != args.dim:
        raise ValueError(f"Matrix is {matrix.dim} x {matrix.dim}, --dim is {args.dim}.")

    diagonal = gaussian_moment_diag(args.eigs, args.beta)
    wick = gaussian_moment_wick(matrix, args.beta)
    row = {"beta": ",".join(map(str, args.beta)), "diagonal": diagonal, "wick": wick, "difference": wick - diagonal}
    if args.quadrature:
        row["quadrature"] = gaussian_moment_quadrature(matrix, args.beta)
        row["wick_minus_quadrature"] = wick - row["quadrature"]
    logger.info(f"Moments for beta={args.beta}: diagonal {diagonal:.15g}, wick {wick:.15g}.")
    _emit(args, pd.DataFrame([row]))
    return EXIT_OK


def cmd_suite(args, logger) -> int:
    runner = _runner(args, logger)
    suite = AcceptanceSuite(runner, args.n or SUITE_N, logger)
    if args.export:
        for path in suite.export(args.export):
            print(path)
        return EXIT_OK
    summary = suite.run()
    passed = bool(summary["passed"].astype(bool).all())
    _emit(args, summary, None, f"suite: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAILED


COMMANDS = {
    "verify": cmd_verify,
    "approx": cmd_approx,
    "oracle": cmd_oracle,
    "rates": cmd_rates,
    "lemmas": cmd_lemmas,
    "moments": cmd_moments,
    "suite": cmd_suite,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_list_values(argv))
    logger = SetupLogger(
        log_file=args.log_file, log_level=getattr(logging, args.log_level), console=args.verbose, name="scripts"
    ).get_logger()
    try:
        return COMMANDS[args.command](args, logger)
    except (LaplaceAsymError, ValueError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        print(f"laplace-asym {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
