import logging
import os

import pandas as pd

from scripts.critpoint import ProblemSpec
from scripts.exceptions import LaplaceAsymError
from scripts.fields import PolynomialField
from scripts.harness import ExperimentRunner
from scripts.problem_io import write_problem
from scripts.rates import Verdict

SUITE_N = [2 ** j for j in range(6, 17)]


def _poly(dimension: int, text: str, name: str) -> PolynomialField:
    return PolynomialField.from_text(text, dimension, name=name)


def builtin_problems() -> list:
    """The eight acceptance problems, all on (-1, 1)^d."""
    one = [(-1.0, 1.0)]
    two = [(-1.0, 1.0), (-1.0, 1.0)]
    return [
        ProblemSpec(one, _poly(1, "-1 2", "h"), None, _poly(1, "1 0", "g"), name="classical"),
        ProblemSpec(one, _poly(1, "-0.5 2", "h"), None, _poly(1, "1 2", "g"), k=2, name="degenerate_k2"),
        ProblemSpec(
            one, _poly(1, "-0.5 2; -0.08333333333333333 4", "h"), None, _poly(1, "1 4", "g"),
            k=4, name="degenerate_k4",
        ),
        ProblemSpec(two, _poly(2, "-0.5 2 0; -1 0 2", "h"), None, _poly(2, "1 0 0", "g"), name="diagonal_2d"),
        ProblemSpec(
            two, _poly(2, "-0.5 2 0; -0.5 0 2", "h"), _poly(2, "1 0 0; 1 1 1", "sigma"), _poly(2, "1 0 0", "g"),
            p=1.5, s=1.0, name="isotropic_2d_perturbed",
        ),
        ProblemSpec(
            one, _poly(1, "-0.5 2", "h"), _poly(1, "1 0", "sigma"), _poly(1, "1 0", "g"),
            p=1.25, s=1.0, name="first_branch_p125",
        ),
        ProblemSpec(
            one, _poly(1, "-0.5 2; 0.1 3", "h"), _poly(1, "1 0; 1 1", "sigma"), _poly(1, "1 0; 1 2", "g"),
            p=1.1, s=1.0, name="first_branch_p11",
        ),
        ProblemSpec(
            one, _poly(1, "-0.5 2", "h"), _poly(1, "1 0", "sigma"), _poly(1, "1 0", "g"),
            p=2.0, s=1.0, name="second_branch_p2",
        ),
    ]


class AcceptanceSuite:
    """
    Runs the theorem experiment on every built-in problem and the lemma suite on the perturbed ones.

    A problem passes when no verdict is ``violated`` and every step completes.

    Parameters:
        runner (ExperimentRunner, optional): Configured experiment runner.
        n_list (list of int, optional): Sample sizes; defaults to 2^6 ... 2^16.
        logger (logging.Logger, optional): Logger.
    """

    def __init__(self, runner: ExperimentRunner = None, n_list=None, logger: logging.Logger = None):
        self.logger = logger or logging.getLogger(__name__)
        self.runner = runner or ExperimentRunner(logger=self.logger)
        self.n_list = list(n_list) if n_list is not None else list(SUITE_N)
        self.problems = builtin_problems()

    def run_problem(self, prob: ProblemSpec) -> dict:
        row = {"problem": prob.name, "d": prob.dimension, "k": prob.k, "p": prob.effective_p}
        try:
            experiment = self.runner.run_theorem_experiment(prob, self.n_list)
            row.update(
                predicted_q=experiment.predicted_q,
                slope=experiment.summary()["slope"],
                verdict=experiment.verdict.value,
            )
            passed = experiment.verdict != Verdict.VIOLATED
            if prob.is_perturbed:
                lemmas = self.runner.run_lemma_suite(prob, self.n_list)
                row["lemmas"] = ", ".join(f"{k}={v.value}" for k, v in lemmas.verdicts.items())
                passed = passed and lemmas.passed
            row["passed"] = passed
        except LaplaceAsymError as exc:
            self.logger.error(f"Suite problem '{prob.name}' failed: {exc}")
            row.update(verdict="error", error=str(exc), passed=False)
        return row

    def run(self) -> pd.DataFrame:
        rows = [self.run_problem(prob) for prob in self.problems]
        summary = pd.DataFrame(rows)
        failed = summary.loc[~summary["passed"].astype(bool), "problem"].tolist()
        if failed:
            self.logger.error(f"Acceptance suite failed for {failed}.")
        else:
            self.logger.info(f"Acceptance suite passed ({len(rows)} problems).")
        return summary

    def export(self, directory: str) -> list:
        """Write every built-in problem as ``<name>.json`` under directory."""
        os.makedirs(directory, exist_ok=True)
        paths = [write_problem(prob, os.path.join(directory, f"{prob.name}.json")) for prob in self.problems]
        self.logger.info(f"Exported {len(paths)} problem files to {directory}.")
        return paths
