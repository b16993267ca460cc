import itertools
import logging
import math
import unittest
from unittest.mock import patch

import numpy as np
from scipy.special import gamma

from scripts.asymptotics import (
    DEGENERATE,
    LIMIT,
    PERTURBED,
    LaplaceExpansion,
    approx_I,
    classical_coefficient,
    double_factorial,
    exponent_q,
    gaussian_moment_diag,
    gaussian_moment_wick,
    half_integer_gamma,
    leading_coefficient,
    perfect_pairings,
)
from scripts.critpoint import ProblemSpec, verify_assumptions
from scripts.exceptions import DegenerateLeadingTermError, NotNegativeDefiniteError
from scripts.fields import PolynomialField
from scripts.symmat import SymMatrix, jacobi_eigen


def poly(text, d=1):
    return PolynomialField.from_text(text, d)


def even_betas(d, max_order):
    for entries in itertools.product(range(0, max_order + 1, 2), repeat=d):
        if sum(entries) <= max_order:
            yield entries


class TestSpecialNumbers(unittest.TestCase):
    def test_double_factorial(self):
        self.assertEqual(double_factorial(0), 1)
        self.assertEqual(double_factorial(4), 8)
        self.assertEqual(double_factorial(6), 48)
        with self.assertRaises(ValueError):
            double_factorial(3)
        with self.assertRaises(ValueError):
            double_factorial(-2)

    def test_half_integer_gamma(self):
        self.assertAlmostEqual(half_integer_gamma(0), math.sqrt(math.pi))
        self.assertAlmostEqual(half_integer_gamma(2), math.sqrt(math.pi) / 2)
        self.assertAlmostEqual(half_integer_gamma(4), 3 * math.sqrt(math.pi) / 4)
        for m in range(0, 20):
            self.assertAlmostEqual(half_integer_gamma(m) / gamma((m + 1) / 2), 1.0, places=13)

    def test_perfect_pairings_count(self):
        # (2m - 1)!! pairings of 2m items
        for m in range(0, 6):
            count = sum(1 for _ in perfect_pairings(range(2 * m)))
            self.assertEqual(count, math.prod(range(2 * m - 1, 0, -2)))


class TestGaussianMoments(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(31)

    def test_diagonal_examples(self):
        self.assertAlmostEqual(gaussian_moment_diag([-1.0], (0,)), math.sqrt(2 * math.pi), places=14)
        self.assertAlmostEqual(gaussian_moment_diag([-1.0], (2,)), math.sqrt(2 * math.pi), places=14)
        self.assertEqual(gaussian_moment_diag([-2.0, -1.0], (1, 0)), 0.0)

    def test_diagonal_rejects_non_negative(self):
        with self.assertRaises(NotNegativeDefiniteError):
            gaussian_moment_diag([-1.0, 0.0], (0, 0))

    def test_wick_examples(self):
        for d in (1, 2, 3):
            value = gaussian_moment_wick(SymMatrix.identity(d) * -1.0, (0,) * d)
            self.assertAlmostEqual(value / (2 * math.pi) ** (d / 2), 1.0, places=13)
        a = SymMatrix([[-2.0, 1.0], [1.0, -2.0]])
        self.assertAlmostEqual(gaussian_moment_wick(a, (1, 1)), 2 * math.pi / (3 * math.sqrt(3)), places=12)
        self.assertAlmostEqual(gaussian_moment_wick(a, (2, 0)), 2 * math.pi * (2.0 / 3.0) / math.sqrt(3), places=12)
        self.assertEqual(gaussian_moment_wick(a, (2, 1)), 0.0)

    def test_wick_rejects_indefinite(self):
        with self.assertRaises(NotNegativeDefiniteError):
            gaussian_moment_wick(SymMatrix([[-1.0, 2.0], [2.0, -1.0]]), (0, 0))
        with self.assertRaises(ValueError):
            gaussian_moment_wick(SymMatrix.identity(1) * -1.0, (12,))

    def test_diagonal_matches_wick(self):
        for d in (1, 2, 3):
            for _ in range(50):
                lam = -self.rng.uniform(0.3, 4.0, size=d)
                for beta in even_betas(d, 6):
                    diag = gaussian_moment_diag(lam, beta)
                    wick = gaussian_moment_wick(SymMatrix.diag(lam), beta)
                    self.assertLessEqual(abs(diag - wick), 1e-12 * abs(diag))

    def test_odd_annihilation(self):
        lam = [-1.0, -2.0, -0.5]
        for beta in itertools.product(range(4), repeat=3):
            if any(b % 2 for b in beta):
                self.assertEqual(gaussian_moment_diag(lam, beta), 0.0)
            if sum(beta) % 2:
                self.assertEqual(gaussian_moment_wick(SymMatrix.diag(lam), beta), 0.0)

    def test_scaling_law(self):
        lam = np.array([-1.3, -0.7])
        beta = (2, 4)
        for t in (0.5, 2.0, 7.0):
            scaled = gaussian_moment_diag(t * lam, beta)
            expected = t ** (-(sum(beta) + 2) / 2) * gaussian_moment_diag(lam, beta)
            self.assertAlmostEqual(scaled / expected, 1.0, places=12)


class TestExponentQ(unittest.TestCase):
    def test_branches(self):
        self.assertAlmostEqual(exponent_q(1.25, 1, 0), 0.75)
        self.assertAlmostEqual(exponent_q(2.0, 1, 0), 1.0)
        self.assertAlmostEqual(exponent_q(math.inf, 2, 2), 2.5)

    def test_continuity_at_three_halves(self):
        for d, k in ((1, 0), (2, 2), (3, 4)):
            below = exponent_q(1.5 - 1e-12, d, k)
            self.assertAlmostEqual(below, exponent_q(1.5, d, k), places=10)
            self.assertAlmostEqual(exponent_q(1.5, d, k), d / 2 + k / 2 + 0.5)

    def test_rejects_p_at_most_one(self):
        for p in (1.0, 0.5):
            with self.assertRaises(ValueError):
                exponent_q(p, 1, 0)
        with self.assertRaises(ValueError):
            exponent_q(2.0, 1, 1)


class TestLeadingCoefficient(unittest.TestCase):
    def setUp(self):
        self.logger = logging.getLogger('TestLogger')
        self.logger.setLevel(logging.DEBUG)

    def _coefficient(self, prob):
        report = verify_assumptions(prob, [64])
        return leading_coefficient(prob, report.c, report.eigen), report

    def test_classical(self):
        prob = ProblemSpec([(-1, 1)], poly("-1 2"), None, poly("1 0"))
        k_value, report = self._coefficient(prob)
        self.assertAlmostEqual(k_value, math.sqrt(math.pi), places=12)
        self.assertAlmostEqual(classical_coefficient(prob, report.c, report.determinant), k_value, places=13)

    def test_degenerate_k2(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2"), None, poly("1 2"), k=2)
        k_value, _ = self._coefficient(prob)
        self.assertAlmostEqual(k_value, math.sqrt(2 * math.pi), places=12)

    def test_degenerate_k4(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2"), None, poly("1 4"), k=4)
        k_value, _ = self._coefficient(prob)
        self.assertAlmostEqual(k_value, 3 * math.sqrt(2 * math.pi), places=12)

    def test_two_dimensional_diagonal(self):
        prob = ProblemSpec([(-1, 1), (-1, 1)], poly("-0.5 2 0; -1 0 2", 2), None, poly("1 0 0", 2))
        k_value, _ = self._coefficient(prob)
        self.assertAlmostEqual(k_value, 2 * math.pi / math.sqrt(2), places=12)

    def test_mixed_odd_derivatives_give_degenerate_status(self):
        # g = xy: every order-2 derivative with even entries vanishes at 0
        prob = ProblemSpec([(-1, 1), (-1, 1)], poly("-0.5 2 0; -0.5 0 2", 2), None, poly("1 1 1", 2), k=2)
        eig = jacobi_eigen(prob.h.hessian(np.zeros(2)))
        with self.assertLogs("scripts.asymptotics", level="WARNING"):
            self.assertEqual(leading_coefficient(prob, np.zeros(2), eig), 0.0)
        with self.assertRaises(DegenerateLeadingTermError):
            leading_coefficient(prob, np.zeros(2), eig, strict=True)


class TestApproximation(unittest.TestCase):
    def setUp(self):
        self.logger = logging.getLogger('TestLogger')
        self.logger.setLevel(logging.DEBUG)

    def test_classical_limit(self):
        prob = ProblemSpec([(-1, 1)], poly("-1 2"), None, poly("1 0"))
        report = verify_assumptions(prob, [10 ** 4])
        log_scale, mantissa = approx_I(prob, report, 10 ** 4, LIMIT)
        self.assertAlmostEqual(log_scale, 0.0, places=12)
        self.assertAlmostEqual(mantissa, math.sqrt(math.pi / 1e4), places=14)

    def test_unperturbed_variants_agree(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2; -0.1 4"), None, poly("1 0; 1 2"))
        report = verify_assumptions(prob, [100, 1000])
        expansion = LaplaceExpansion(prob, report, self.logger)
        for n in (100, 1000):
            self.assertEqual(expansion.approx_I(n, LIMIT), expansion.approx_I(n, PERTURBED))

    def test_constant_sigma_perturbed_variant(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2"), poly("1 0"), poly("1 0"), p=2.0, s=1.0)
        report = verify_assumptions(prob, [100])
        log_scale, mantissa = approx_I(prob, report, 100, PERTURBED)
        self.assertAlmostEqual(log_scale, 0.01, places=14)
        self.assertAlmostEqual(mantissa, math.sqrt(2 * math.pi / 100), places=14)

    def test_untracked_n_is_tracked_on_demand(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2"), poly("1 1"), poly("1 0"), p=2.0, s=1.0)
        report = verify_assumptions(prob, [100])
        log_scale, _ = LaplaceExpansion(prob, report, self.logger).approx_I(10, PERTURBED)
        # h_10(c_10) = -eps^2/2 + eps^2 with eps = 0.01
        self.assertAlmostEqual(log_scale, 10 * 0.5e-4, places=14)

    def test_expand_and_status(self):
        prob = ProblemSpec([(-1, 1), (-1, 1)], poly("-0.5 2 0; -0.5 0 2", 2), None, poly("1 1 1", 2), k=2)
        report = verify_assumptions(prob, [64])
        expansion = LaplaceExpansion(prob, report, self.logger)
        self.assertEqual(expansion.status, DEGENERATE)
        result = expansion.expand([256, 64, 64])
        self.assertEqual(list(result.to_frame()["n"]), [64, 256])
        self.assertGreater(result.q, result.exponent)

    def test_classical_constant_cross_check(self):
        prob = ProblemSpec([(-1, 1)], poly("-0.5 2; -0.1 4"), None, poly("2 0; 1 2"))
        report = verify_assumptions(prob, [64])
        with patch.object(self.logger, "warning") as warning:
            expansion = LaplaceExpansion(prob, report, self.logger)
        warning.assert_not_called()
        self.assertAlmostEqual(expansion.classical_K / expansion.K, 1.0, places=12)
        self.assertAlmostEqual(expansion.K, 2 * math.sqrt(2 * math.pi), places=12)

        degenerate = ProblemSpec([(-1, 1)], poly("-0.5 2"), None, poly("1 2"), k=2)
        self.assertIsNone(LaplaceExpansion(degenerate, verify_assumptions(degenerate, [64]), self.logger).classical_K)

    def test_unknown_variant(self):
        prob = ProblemSpec([(-1, 1)], poly("-1 2"), None, poly("1 0"))
        report = verify_assumptions(prob, [64])
        with self.assertRaises(ValueError):
            approx_I(prob, report, 64, "midpoint")


if __name__ == '__main__':
    unittest.main()
