import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from scripts.critpoint import CriticalPointAnalyzer, CriticalReport, ProblemSpec
from scripts.exceptions import DegenerateLeadingTermError, NotNegativeDefiniteError
from scripts.fields import as_multi_index, enumerate_multi_indices
from scripts.symmat import EigenDecomposition, SymMatrix, jacobi_eigen

MAX_WICK_ORDER = 10

LIMIT = "limit"
PERTURBED = "perturbed"
DEGENERATE = "degenerate-leading-term"
CLASSICAL_RTOL = 1e-10

logger = logging.getLogger(__name__)


def double_factorial(m: int) -> int:
    """m!! = m (m - 2) ... 2 for even m >= 0, with 0!! = 1."""
    if int(m) != m or m < 0 or m % 2:
        raise ValueError(f"double_factorial expects an even integer >= 0, got {m}.")
    return math.prod(range(int(m), 0, -2))


def half_integer_gamma(m: int) -> float:
    """Gamma((m + 1) / 2) from Gamma(1/2) = sqrt(pi), Gamma(1) = 1 and Gamma(z + 1) = z Gamma(z)."""
    if int(m) != m or m < 0:
        raise ValueError(f"half_integer_gamma expects an integer >= 0, got {m}.")
    target = (m + 1) / 2.0
    z, value = (0.5, math.sqrt(math.pi)) if m % 2 == 0 else (1.0, 1.0)
    while z < target:
        value *= z
        z += 1.0
    return value


def gaussian_moment_diag(eigenvalues, beta) -> float:
    """
    int exp(1/2 y^T diag(lambda) y) y^beta dy as a product of one-dimensional moments.

    Any odd entry of beta gives 0; otherwise
    prod_i (|lambda_i| / 2)^(-(beta_i + 1) / 2) Gamma((beta_i + 1) / 2).
    """
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    beta = as_multi_index(beta)
    if beta.dimension != lam.size:
        raise ValueError(f"beta has dimension {beta.dimension}, got {lam.size} eigenvalues.")
    if np.any(lam >= 0.0):
        raise NotNegativeDefiniteError(f"Gaussian moments need negative eigenvalues, got {lam.tolist()}.")
    if not beta.is_even:
        return 0.0
    return math.prod(
        (abs(l) / 2.0) ** (-(b + 1) / 2.0) * half_integer_gamma(b) for l, b in zip(lam, beta)
    )


def perfect_pairings(items):
    """Yield every partition of items into unordered pairs."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for pairing in perfect_pairings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + pairing


def gaussian_moment_wick(a: SymMatrix, beta) -> float:
    """
    int exp(1/2 y^T A y) y^beta dy for a general negative-definite A.

    Equals (2 pi)^(d/2) / sqrt(det(-A)) times the sum over perfect pairings of
    the label multiset (beta_i copies of i) of prod Sigma_ab, Sigma = (-A)^-1.
    """
    beta = as_multi_index(beta)
    if beta.dimension != a.dim:
        raise ValueError(f"beta has dimension {beta.dimension}, matrix has {a.dim}.")
    if beta.order > MAX_WICK_ORDER:
        raise ValueError(f"Wick expansion is limited to |beta| <= {MAX_WICK_ORDER}, got {beta.order}.")
    eig = jacobi_eigen(a)
    if eig.eigenvalues[-1] >= 0.0:
        raise NotNegativeDefiniteError(f"Matrix is not negative definite (eigenvalues {eig.eigenvalues.tolist()}).")
    if beta.order % 2:
        return 0.0

    magnitudes = np.abs(eig.eigenvalues)
    covariance = (eig.basis / magnitudes) @ eig.basis.T
    labels = [axis for axis, count in enumerate(beta) for _ in range(count)]
    total = sum(
        math.prod(covariance[i, j] for i, j in pairing) for pairing in perfect_pairings(labels)
    )
    return (2.0 * math.pi) ** (a.dim / 2.0) / math.sqrt(float(np.prod(magnitudes))) * total


def exponent_q(p: float, d: int, k: int) -> float:
    """
    Predicted error exponent q(p, d, k).

    d/2 + k/2 + (p - 1) for 1 < p < 3/2, and d/2 + k/2 + 1/2 for p >= 3/2
    (p = inf encodes an unperturbed phase).
    """
    if not p > 1.0:
        raise ValueError(f"The expansion needs p > 1, got {p}.")
    if d < 1 or k < 0 or k % 2:
        raise ValueError(f"Need d >= 1 and even k >= 0, got d={d}, k={k}.")
    base = d / 2.0 + k / 2.0
    if p < 1.5:
        return base + (p - 1.0)
    return base + 0.5


def _beta_sum(prob: ProblemSpec, c, eigenvalues) -> float:
    total = 0.0
    for beta in enumerate_multi_indices(prob.dimension, prob.k, even_only=True):
        weight = math.prod(abs(l) ** (-b / 2.0) / double_factorial(b) for l, b in zip(eigenvalues, beta))
        total += prob.g.eval_partial(beta, c) * weight
    return total


def leading_coefficient(prob: ProblemSpec, c, eig: EigenDecomposition, strict: bool = False) -> float:
    """
    Leading coefficient K of I_n ~ e^{n h(c)} n^{-d/2-k/2} K.

    K = sqrt((2 pi)^d / |det|) * sum over even |beta| = k of
    d^beta g(c) prod_i |lambda_i|^{-beta_i/2} / beta_i!!, with ascending eigenvalues.

    Parameters:
        prob (ProblemSpec): Problem (g and k are used).
        c (array-like): Point where g is differentiated.
        eig (EigenDecomposition): Spectrum of the Hessian that fixes the Gaussian width.
        strict (bool): Raise DegenerateLeadingTermError when K = 0.
    """
    lam = np.sort(np.asarray(eig.eigenvalues, dtype=float))
    det = float(np.prod(lam))
    if det == 0.0:
        raise ValueError("Leading coefficient is undefined for a singular Hessian.")
    if np.any(lam >= 0.0):
        raise NotNegativeDefiniteError(f"Hessian eigenvalues {lam.tolist()} are not all negative.")
    value = math.sqrt((2.0 * math.pi) ** prob.dimension / abs(det)) * _beta_sum(prob, c, lam)
    if value == 0.0:
        logger.warning(f"Leading coefficient of '{prob.name}' vanishes (degenerate leading term).")
        if strict:
            raise DegenerateLeadingTermError("All even order-k derivatives of g vanish at c.")
    return value


def classical_coefficient(prob: ProblemSpec, c, det: float) -> float:
    """g(c) sqrt((2 pi)^d / |det D^2 h(c)|), the k = 0 Laplace constant."""
    return prob.g(c) * math.sqrt((2.0 * math.pi) ** prob.dimension / abs(det))


@dataclass
class ExpansionResult:
    """
    Leading-order approximation of I_n on a list of n.

    Each row carries log_scale and mantissa with I_n ~ exp(log_scale) * mantissa.
    """

    K: float
    exponent: float
    q: float
    variant: str
    status: str = "ok"
    rows: list = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["n", "log_scale", "mantissa"])


class LaplaceExpansion:
    """
    Theorem-level approximation of I_n built on a CriticalReport.

    Parameters:
        problem (ProblemSpec): The integral.
        report (CriticalReport): Maximizer and tracked c_n from verify_assumptions.
        logger (logging.Logger, optional): Logger.
    """

    def __init__(self, problem: ProblemSpec, report: CriticalReport, logger: logging.Logger = None):
        if report is None:
            raise ValueError("LaplaceExpansion needs a CriticalReport.")
        self.problem = problem
        self.report = report
        self.logger = logger or logging.getLogger(__name__)
        self._analyzer = CriticalPointAnalyzer(problem, logger=self.logger)
        self.K = leading_coefficient(problem, report.c, report.eigen)
        self.exponent = problem.dimension / 2.0 + problem.k / 2.0
        self.classical_K = None
        if problem.k == 0:
            self.classical_K = classical_coefficient(problem, report.c, report.determinant)
            if abs(self.classical_K - self.K) > CLASSICAL_RTOL * max(abs(self.K), abs(self.classical_K)):
                self.logger.warning(
                    f"K = {self.K:.15g} disagrees with the classical constant {self.classical_K:.15g} "
                    f"for '{problem.name}'."
                )

    @property
    def q(self) -> float:
        return exponent_q(self.problem.effective_p, self.problem.dimension, self.problem.k)

    @property
    def status(self) -> str:
        return DEGENERATE if self.K == 0.0 else "ok"

    def _record(self, n):
        record = self.report.record_for(n)
        if record is None:
            self.logger.info(f"n={n} not in the report; tracking c_n from c.")
            c_n = self._analyzer.track(n, self.report.c)
            record = self._analyzer.make_record(n, self.report.c, c_n, self.report.hessian)
        return record

    def approx_I(self, n: int, variant: str = LIMIT):
        """
        Leading-order value of I_n as (log_scale, mantissa).

        limit: log_scale = n h(c), mantissa = n^{-d/2-k/2} K(c, lambda(c)).
        perturbed: log_scale = n h_n(c_n), mantissa = n^{-d/2-k/2} K with the
        spectrum of D^2 h_n(c_n) (g still differentiated at c).
        """
        prob = self.problem
        power = float(n) ** (-self.exponent)
        if variant == LIMIT:
            return n * self.report.value, power * self.K
        if variant != PERTURBED:
            raise ValueError(f"Unknown variant '{variant}'; use '{LIMIT}' or '{PERTURBED}'.")
        record = self._record(n)
        eig = EigenDecomposition(eigenvalues=record.eigenvalues, basis=np.eye(prob.dimension))
        k_n = leading_coefficient(prob, self.report.c, eig)
        return n * prob.phase(record.c_n, n), power * k_n

    def expand(self, n_list, variant: str = LIMIT) -> ExpansionResult:
        rows = []
        for n in sorted(set(int(n) for n in n_list)):
            log_scale, mantissa = self.approx_I(n, variant)
            rows.append({"n": n, "log_scale": log_scale, "mantissa": mantissa})
        return ExpansionResult(
            K=self.K, exponent=self.exponent, q=self.q, variant=variant, status=self.status, rows=rows
        )


def approx_I(prob: ProblemSpec, report: CriticalReport, n: int, variant: str = LIMIT):
    return LaplaceExpansion(prob, report).approx_I(n, variant)
