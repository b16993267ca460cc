import json
import logging
import math
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd

from scripts.critpoint import ProblemSpec
from scripts.exceptions import AssumptionViolation, OracleConvergenceError
from scripts.fields import PolynomialField
from scripts.harness import (
    THEOREM_COLUMNS,
    ExperimentConfig,
    ExperimentRunner,
    emit_table,
    n_grid,
    run_lemma_suite,
    run_theorem_experiment,
)
from scripts.oracle import OracleResult, QuadratureOracle
from scripts.rates import Verdict

N_LIST = [2 ** j for j in range(6, 17)]


def poly(text, d=1):
    return PolynomialField.from_text(text, d)


def constant_shift_problem(p):
    return ProblemSpec([(-1, 1)], poly("-0.5 2"), poly("1 0"), poly("1 0"), p=p, s=1.0, name=f"shift_p{p:g}")


class TestNGrid(unittest.TestCase):
    def test_geometric(self):
        self.assertEqual(n_grid(64, 65536, 11), N_LIST)

    def test_linear(self):
        self.assertEqual(n_grid(10, 50, 5, geometric=False), [10, 20, 30, 40, 50])

    def test_rounding_collisions_are_removed(self):
        grid = n_grid(1, 4, 10)
        self.assertEqual(grid, sorted(set(grid)))
        self.assertEqual(grid[0], 1)
        self.assertEqual(grid[-1], 4)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            n_grid(0, 10, 5)
        with self.assertRaises(ValueError):
            n_grid(10, 10, 5)
        with self.assertRaises(ValueError):
            n_grid(1, 10, 1)


class TestTheoremExperiment(unittest.TestCase):
    def setUp(self):
        self.logger = logging.getLogger('TestLogger')
        self.logger.setLevel(logging.DEBUG)
        self.runner = ExperimentRunner(logger=self.logger)

    def test_first_branch_saturates(self):
        experiment = self.runner.run_theorem_experiment(constant_shift_problem(1.25), N_LIST)

        # Assertions
        self.assertAlmostEqual(experiment.predicted_q, 0.75)
        self.assertEqual(experiment.verdict, Verdict.SATURATED)
        self.assertLess(abs(experiment.fit.slope + 0.75), 0.15)
        self.assertGreaterEqual(experiment.fit.r_squared, 0.99)
        self.assertAlmostEqual(experiment.K, math.sqrt(2 * math.pi), places=12)

    def test_second_branch_beats_the_bound(self):
        experiment = self.runner.run_theorem_experiment(constant_shift_problem(2.0), N_LIST)
        self.assertAlmostEqual(experiment.predicted_q, 1.0)
        self.assertEqual(experiment.verdict, Verdict.BOUND_RESPECTED)
        self.assertLess(abs(experiment.fit.slope + 1.5), 0.05)
        # the expansion around c_n absorbs the constant shift exactly
        self.assertTrue(experiment.perturbed_drift.exact)

    def test_classical_is_exact(self):
        prob = ProblemSpec([(-1, 1)], poly("-1 2"), None, poly("1 0"), name="classical")
        experiment = run_theorem_experiment(prob, N_LIST)
        self.assertEqual(experiment.verdict, Verdict.EXACT)
        self.assertIsNone(experiment.fit)
        self.assertEqual(experiment.summary()["verdict"], "exact")

    def test_isotropic_perturbation_in_two_dimensions(self):
        prob = ProblemSpec(
            [(-1, 1), (-1, 1)], poly("-0.5 2 0; -0.5 0 2", 2), poly("1 0 0; 1 1 1", 2), poly("1 0 0", 2),
            p=1.5, s=1.0, name="isotropic",
        )
        experiment = self.runner.run_theorem_experiment(prob, N_LIST)
        self.assertAlmostEqual(experiment.predicted_q, 1.5)
        self.assertNotEqual(experiment.verdict, Verdict.VIOLATED)

    def test_table_is_on_the_common_scale(self):
        experiment = self.runner.run_theorem_experiment(constant_shift_problem(2.0), N_LIST)
        table = experiment.table
        self.assertEqual(list(table.columns), THEOREM_COLUMNS)
        self.assertEqual(list(table["n"]), N_LIST)
        self.assertTrue(table["converged"].all())
        # oracle log scale is n * eps_n = 1 / n above the limit scale
        np.testing.assert_allclose(table["oracle_log_scale"] - table["log_scale"], 1.0 / table["n"], rtol=1e-12)
        self.assertLess(abs(table["ratio"].iloc[-1] - 1.0), 1e-4)
        np.testing.assert_allclose(table["approx_mantissa"], np.sqrt(2 * np.pi / table["n"]), rtol=1e-13)

    def test_rescaled_residual_matches_direct_difference(self):
        prob = ProblemSpec([(-1, 1)], poly("0.7 0; -0.5 2"), poly("1 0"), poly("1 0"), p=2.0, s=1.0, name="lifted")
        experiment = self.runner.run_theorem_experiment(prob, [2, 4, 8, 16, 32, 64, 128, 256])
        small = experiment.table[experiment.table["n"] <= 16]
        self.assertEqual(len(small), 4)
        for row in small.itertuples():
            integral = math.exp(row.oracle_log_scale) * row.oracle_mantissa
            direct = abs(integral - math.exp(row.log_scale) * row.approx_mantissa)
            self.assertAlmostEqual(row.log_scale, 0.7 * row.n, places=12)
            self.assertLess(abs(row.residual * math.exp(row.log_scale) / direct - 1.0), 1e-10, msg=f"n={row.n}")

    def test_refuses_p_at_most_one(self):
        with self.assertRaises(ValueError):
            self.runner.run_theorem_experiment(constant_shift_problem(1.0), N_LIST)

    def test_refuses_short_n_list(self):
        prob = constant_shift_problem(2.0)
        with self.assertRaises(ValueError):
            self.runner.run_theorem_experiment(prob, [64, 128, 256, 512, 1024, 2048])
        with self.assertRaises(ValueError):
            self.runner.run_theorem_experiment(prob, [64, 6400, 64000])

    def test_hard_assumption_failure_stops_the_run(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2"), None, poly("1 2"), k=0)
        with self.assertRaises(AssumptionViolation):
            self.runner.run_theorem_experiment(prob, N_LIST)

    @patch.object(QuadratureOracle, "reference_integral")
    def test_non_converged_oracle_is_an_error(self, mock_reference):
        mock_reference.side_effect = lambda n, center=None: OracleResult(
            n, 0.0, 1.0, 1e-3, False, 100, 8, center,
        )
        prob = ProblemSpec([(-1, 1)], poly("-1 2"), None, poly("1 0"))
        with self.assertRaises(OracleConvergenceError):
            self.runner.run_theorem_experiment(prob, N_LIST)
        self.assertEqual(mock_reference.call_count, len(N_LIST))

    def test_single_worker_matches_threaded(self):
        prob = constant_shift_problem(1.25)
        serial = ExperimentRunner(experiment_config=ExperimentConfig(workers=1)).run_theorem_experiment(prob, N_LIST)
        threaded = ExperimentRunner(experiment_config=ExperimentConfig(workers=4)).run_theorem_experiment(prob, N_LIST)
        np.testing.assert_allclose(serial.table["residual"], threaded.table["residual"], rtol=1e-12)


class TestLemmaSuite(unittest.TestCase):
    def setUp(self):
        self.logger = logging.getLogger('TestLogger')
        self.logger.setLevel(logging.DEBUG)

    def test_linear_sigma_moves_the_maximizer(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2"), poly("1 1"), poly("1 0"), p=2.0, s=1.0, name="linear")
        result = ExperimentRunner(logger=self.logger).run_lemma_suite(prob, N_LIST)

        # Assertions
        self.assertEqual(result.verdicts["cn"], Verdict.SATURATED)
        self.assertEqual(result.verdicts["det"], Verdict.EXACT)
        self.assertEqual(result.verdicts["eigen_1"], Verdict.EXACT)
        self.assertTrue(result.passed)
        self.assertIn("cn saturated", result.summary_line())
        self.assertEqual(list(result.weyl["n"]), N_LIST)

    def test_constant_sigma_is_exact(self):
        result = run_lemma_suite(constant_shift_problem(2.0), N_LIST)
        self.assertTrue(all(v == Verdict.EXACT for v in result.verdicts.values()))

    def test_requires_perturbation(self):
        prob = ProblemSpec([(-1, 1)], poly("-1 2"), None, poly("1 0"))
        with self.assertRaises(ValueError):
            run_lemma_suite(prob, N_LIST)


class TestEmitTable(unittest.TestCase):
    def setUp(self):
        self.table = pd.DataFrame({"n": [64, 128], "residual": [1e-3, 2.5e-4]})

    def test_csv_text(self):
        text = emit_table(self.table)
        self.assertEqual(text.splitlines()[0], "n,residual")
        self.assertEqual(len(text.splitlines()), 3)

    def test_json_with_summary(self):
        text = emit_table(self.table, "json", summary={"slope": np.float64(-2.0), "r_squared": math.nan})
        payload = json.loads(text)
        self.assertEqual(payload["rows"][1]["n"], 128)
        self.assertEqual(payload["summary"]["slope"], -2.0)
        self.assertIsNone(payload["summary"]["r_squared"])

    def test_writes_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "out", "table.csv")
            self.assertEqual(emit_table(self.table, "csv", path), path)
            frame = pd.read_csv(path)
            self.assertEqual(list(frame["n"]), [64, 128])

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            emit_table(self.table, "xml")


if __name__ == '__main__':
    unittest.main()
