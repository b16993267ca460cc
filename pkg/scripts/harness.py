import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from scripts.asymptotics import LIMIT, PERTURBED, LaplaceExpansion
from scripts.critpoint import CriticalConfig, CriticalPointAnalyzer, CriticalReport, ProblemSpec
from scripts.exceptions import OracleConvergenceError
from scripts.oracle import QuadratureConfig, QuadratureOracle
from scripts.rates import DEFAULT_FLOOR, SLOPE_TOLERANCE, DriftFit, RateFit, Verdict, fit_rate, fit_residuals

__all__ = [
    "ExperimentConfig",
    "ExperimentRunner",
    "LemmaSuiteResult",
    "RateFit",
    "TheoremExperiment",
    "emit_table",
    "fit_rate",
    "n_grid",
    "run_lemma_suite",
    "run_theorem_experiment",
]

THEOREM_COLUMNS = [
    "n", "oracle_mantissa", "approx_mantissa", "residual", "log_scale",
    "oracle_log_scale", "perturbed_mantissa", "perturbed_residual", "ratio", "est_error", "converged",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Rate-fit controls shared by theorem and lemma experiments.

    Attributes:
        burn_in_below (int): Points with n below this never enter a fit.
        residual_floor (float): Residuals under this are treated as oracle noise.
        slope_tolerance (float): Half-width of the saturation band around the predicted slope.
        workers (int, optional): Threads used to run the n cells; None lets the executor decide.
    """

    burn_in_below: int = 64
    residual_floor: float = DEFAULT_FLOOR
    slope_tolerance: float = SLOPE_TOLERANCE
    workers: int = None

    def __post_init__(self):
        if self.residual_floor <= 0 or self.slope_tolerance <= 0:
            raise ValueError("residual_floor and slope_tolerance must be positive.")


def n_grid(n_min: int, n_max: int, points: int, geometric: bool = True) -> list:
    """Ascending distinct integers from n_min to n_max, geometrically (default) or linearly spaced."""
    if n_min < 1 or n_max <= n_min or points < 2:
        raise ValueError(f"Need 1 <= n_min < n_max and points >= 2, got {n_min}, {n_max}, {points}.")
    if geometric:
        values = np.geomspace(n_min, n_max, points)
    else:
        values = np.linspace(n_min, n_max, points)
    return sorted(set(int(round(v)) for v in values))


@dataclass
class TheoremExperiment:
    """
    Oracle-versus-expansion residuals on a list of n, with their rate fit and verdict.

    residual is |I_n e^{-n h(c)} - n^{-d/2-k/2} K|, both sides on the common
    e^{n h(c)} scale. perturbed_residual compares the oracle with the
    expansion taken around e^{n h_n(c_n)} instead.
    """

    problem: ProblemSpec
    n_list: list
    table: pd.DataFrame
    predicted_q: float
    K: float
    drift: DriftFit
    perturbed_drift: DriftFit
    verdict: Verdict
    report: CriticalReport = None
    status: str = "ok"

    @property
    def fit(self) -> RateFit:
        return self.drift.fit

    def summary(self) -> dict:
        return {
            "problem": self.problem.name,
            "d": self.problem.dimension,
            "k": self.problem.k,
            "p": self.problem.effective_p,
            "K": self.K,
            "predicted_q": self.predicted_q,
            "slope": self.fit.slope if self.fit else math.nan,
            "r_squared": self.fit.r_squared if self.fit else math.nan,
            "perturbed_slope": self.perturbed_drift.fit.slope if self.perturbed_drift.fit else math.nan,
            "max_residual": self.drift.max_residual,
            "verdict": self.verdict.value,
            "status": self.status,
        }

    def summary_line(self) -> str:
        slope = f"{self.fit.slope:.4f}" if self.fit else "n/a"
        return (
            f"{self.problem.name or 'problem'}: slope {slope}, predicted q {self.predicted_q:g}, "
            f"verdict {self.verdict.value}"
        )


@dataclass
class LemmaSuiteResult:
    """Drift fits of c_n, the Hessian determinant and each eigenvalue, classified against p."""

    problem: ProblemSpec
    cn_fit: DriftFit
    det_fit: DriftFit
    eigen_fits: list
    verdicts: dict
    table: pd.DataFrame
    report: CriticalReport = None
    weyl: pd.DataFrame = field(default=None)

    @property
    def passed(self) -> bool:
        return all(v != Verdict.VIOLATED for v in self.verdicts.values())

    def summary(self) -> dict:
        def slope(drift):
            return drift.fit.slope if drift.fit else math.nan

        row = {"problem": self.problem.name, "p": self.problem.p,
               "cn_slope": slope(self.cn_fit), "det_slope": slope(self.det_fit)}
        for i, drift in enumerate(self.eigen_fits):
            row[f"eigen_{i + 1}_slope"] = slope(drift)
        row.update({f"{label}_verdict": v.value for label, v in self.verdicts.items()})
        return row

    def summary_line(self) -> str:
        parts = ", ".join(f"{label} {v.value}" for label, v in self.verdicts.items())
        return f"{self.problem.name or 'problem'} (p={self.problem.p:g}): {parts}"


class ExperimentRunner:
    """
    Runs convergence-rate experiments for one configuration set.

    Parameters:
        quadrature_config (QuadratureConfig, optional): Oracle controls.
        critical_config (CriticalConfig, optional): Maximizer search and assumption checks.
        experiment_config (ExperimentConfig, optional): Fit controls and n-level concurrency.
        logger (logging.Logger, optional): Logger.
    """

    def __init__(self, quadrature_config: QuadratureConfig = None, critical_config: CriticalConfig = None,
                 experiment_config: ExperimentConfig = None, logger: logging.Logger = None):
        self.quadrature_config = quadrature_config or QuadratureConfig()
        self.critical_config = critical_config or CriticalConfig()
        self.experiment_config = experiment_config or ExperimentConfig()
        self.logger = logger or logging.getLogger(__name__)

    def _analyzer(self, prob: ProblemSpec) -> CriticalPointAnalyzer:
        return CriticalPointAnalyzer(prob, self.critical_config, self.logger)

    def _check_n_list(self, n_list, minimum: int) -> list:
        ns = sorted(set(int(n) for n in n_list))
        if len(ns) < minimum or ns[0] < 1 or ns[-1] < 100 * ns[0]:
            self.logger.error(f"n list {ns} is too short: need {minimum} points spanning two decades.")
            raise ValueError(f"n list needs at least {minimum} distinct n >= 1 spanning two decades.")
        return ns

    def _oracle_cells(self, prob: ProblemSpec, report: CriticalReport, ns: list) -> list:
        exp_cfg = self.experiment_config
        quad_cfg = self.quadrature_config
        if exp_cfg.workers != 1:
            quad_cfg = replace(quad_cfg, workers=1)
        oracle = QuadratureOracle(prob, quad_cfg, self.logger, self.critical_config)

        def cell(n):
            return oracle.reference_integral(n, report.record_for(n).c_n)

        with ThreadPoolExecutor(max_workers=exp_cfg.workers) as pool:
            results = list(pool.map(cell, ns))
        for result in results:
            if not result.converged:
                self.logger.error(f"Oracle did not converge at n={result.n} (est_error {result.est_error:.3e}).")
                raise OracleConvergenceError(
                    f"Reference integral did not converge at n={result.n}; est_error {result.est_error:.3e}."
                )
        return results

    def run_theorem_experiment(self, prob: ProblemSpec, n_list) -> TheoremExperiment:
        """
        Compare the oracle with the limit expansion over n_list and classify the residual rate.

        Raises:
            ValueError: If p <= 1 or n_list is too short.
            AssumptionViolation: If a hard assumption flag fails.
            OracleConvergenceError: If the oracle is non-converged at any n.
        """
        exp_cfg = self.experiment_config
        if not prob.effective_p > 1.0:
            self.logger.error(f"Theorem experiment refused for '{prob.name}': p = {prob.p} <= 1.")
            raise ValueError(f"The theorem experiment needs p > 1, got p = {prob.p}.")
        ns = self._check_n_list(n_list, 6)

        report = self._analyzer(prob).verify_assumptions(ns)
        report.raise_for_violations()
        expansion = LaplaceExpansion(prob, report, self.logger)
        results = self._oracle_cells(prob, report, ns)

        rows = []
        for n, result in zip(ns, results):
            limit_scale, limit_mantissa = expansion.approx_I(n, LIMIT)
            pert_scale, pert_mantissa = expansion.approx_I(n, PERTURBED)
            common = result.mantissa * math.exp(result.log_scale - limit_scale)
            perturbed_common = pert_mantissa * math.exp(pert_scale - limit_scale)
            rows.append({
                "n": n,
                "oracle_mantissa": result.mantissa,
                "approx_mantissa": limit_mantissa,
                "residual": abs(common - limit_mantissa),
                "log_scale": limit_scale,
                "oracle_log_scale": result.log_scale,
                "perturbed_mantissa": perturbed_common,
                "perturbed_residual": abs(common - perturbed_common),
                "ratio": common / limit_mantissa if limit_mantissa else math.nan,
                "est_error": result.est_error,
                "converged": result.converged,
            })
        table = pd.DataFrame(rows, columns=THEOREM_COLUMNS)

        q = expansion.q
        drift = fit_residuals("residual", table["n"], table["residual"],
                              min_n=exp_cfg.burn_in_below, floor=exp_cfg.residual_floor)
        perturbed_drift = fit_residuals("perturbed_residual", table["n"], table["perturbed_residual"],
                                        min_n=exp_cfg.burn_in_below, floor=exp_cfg.residual_floor)
        verdict = drift.verdict(q, exp_cfg.slope_tolerance)

        experiment = TheoremExperiment(
            problem=prob, n_list=ns, table=table, predicted_q=q, K=expansion.K, drift=drift,
            perturbed_drift=perturbed_drift, verdict=verdict, report=report, status=expansion.status,
        )
        self.logger.info(experiment.summary_line())
        return experiment

    def run_lemma_suite(self, prob: ProblemSpec, n_list) -> LemmaSuiteResult:
        """
        Drift rates of c_n, det D^2 h_n(c_n) and the eigenvalues, each classified against slope -p.

        Raises:
            ValueError: If s = 0 or n_list is too short.
        """
        exp_cfg = self.experiment_config
        if not prob.is_perturbed:
            raise ValueError("The lemma suite needs a perturbed problem (s > 0).")
        ns = self._check_n_list(n_list, 4)

        analyzer = self._analyzer(prob)
        report = analyzer.verify_assumptions(ns)
        if not report.passed:
            self.logger.warning(f"Lemma suite for '{prob.name}' runs with failing flags {report.hard_failures}.")
        rates = analyzer.drift_rates(ns, report)

        verdicts = {
            "cn": rates.cn_fit.verdict(prob.p, exp_cfg.slope_tolerance),
            "det": rates.det_fit.verdict(prob.p, exp_cfg.slope_tolerance),
        }
        for i, drift in enumerate(rates.eigen_fits):
            verdicts[f"eigen_{i + 1}"] = drift.verdict(prob.p, exp_cfg.slope_tolerance)

        weyl = report.to_frame()[
            ["n", "weyl_perturbation", "weyl_perturbation_bound", "weyl_displacement", "weyl_displacement_bound"]
        ] if report.records else None

        result = LemmaSuiteResult(
            problem=prob, cn_fit=rates.cn_fit, det_fit=rates.det_fit, eigen_fits=rates.eigen_fits,
            verdicts=verdicts, table=rates.table, report=report, weyl=weyl,
        )
        self.logger.info(result.summary_line())
        return result


def run_theorem_experiment(prob: ProblemSpec, n_list, cfg: QuadratureConfig = None) -> TheoremExperiment:
    return ExperimentRunner(quadrature_config=cfg).run_theorem_experiment(prob, n_list)


def run_lemma_suite(prob: ProblemSpec, n_list) -> LemmaSuiteResult:
    return ExperimentRunner().run_lemma_suite(prob, n_list)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def emit_table(table: pd.DataFrame, fmt: str = "csv", path: str = None, summary: dict = None):
    """
    Write a per-n table as CSV or JSON.

    JSON output is an object ``{"rows": [...], "summary": {...}}``; CSV output
    is the bare table. With ``path=None`` the text is returned instead of written.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"Unknown output format '{fmt}'; use 'csv' or 'json'.")
    if fmt == "csv":
        text = table.to_csv(index=False)
    else:
        rows = json.loads(table.to_json(orient="records", double_precision=15))
        payload = {"rows": rows}
        if summary is not None:
            payload["summary"] = {key: _jsonable(value) for key, value in summary.items()}
        text = json.dumps(payload, indent=2)

    if path is None:
        return text
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as handle:
        handle.write(text)
    return path
