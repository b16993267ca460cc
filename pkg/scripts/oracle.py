import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from scripts.critpoint import CriticalConfig, CriticalPointAnalyzer, ProblemSpec
from scripts.exceptions import NotNegativeDefiniteError, QuadratureError
from scripts.fields import as_multi_index
from scripts.symmat import SymMatrix, jacobi_eigen

NEWTON_TOL = 5e-15
MAX_NEWTON_ITER = 100
CHUNK_POINTS = 200_000
TAIL_LOG = 42.0


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Controls for the tensor-product Gauss-Legendre oracle.

    Attributes:
        base_order (int): Nodes per axis per panel.
        refinement_levels (int): Minimum number of geometric (factor 2) panel levels toward the center.
        rel_tol (float): Relative difference between successive rounds accepted as converged.
        max_total_nodes (int): Node budget per round, over all axes.
        max_rounds (int): Panel-halving rounds attempted before giving up.
        workers (int, optional): Thread count for panel chunks; None lets the executor decide.
    """

    base_order: int = 32
    refinement_levels: int = 6
    rel_tol: float = 1e-10
    max_total_nodes: int = 10 ** 7
    max_rounds: int = 8
    workers: int = None

    def __post_init__(self):
        if self.base_order < 2:
            raise ValueError(f"base_order must be >= 2, got {self.base_order}.")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}.")
        if self.refinement_levels < 0 or self.max_rounds < 1 or self.max_total_nodes < 1:
            raise ValueError("refinement_levels must be >= 0, max_rounds and max_total_nodes >= 1.")


@lru_cache(maxsize=64)
def _reference_rule(m: int):
    i = np.arange(m)
    x = np.cos(np.pi * (i + 0.75) / (m + 0.5))
    for _ in range(MAX_NEWTON_ITER):
        p_prev, p = np.ones_like(x), x.copy()
        for j in range(2, m + 1):
            p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
        dp = m * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    else:
        raise QuadratureError(f"Legendre root iteration did not converge for m={m}.")

    # derivative at the converged roots
    p_prev, p = np.ones_like(x), x.copy()
    for j in range(2, m + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    dp = m * (x * p - p_prev) / (x * x - 1.0)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)

    order = np.argsort(x)
    nodes, weights = x[order], weights[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre_rule(m: int, a: float = -1.0, b: float = 1.0):
    """
    m-point Gauss-Legendre rule on [a, b].

    Nodes are the roots of P_m found by Newton iteration from Chebyshev
    guesses; the rule is exact for polynomials of degree <= 2m - 1.

    Returns:
        tuple: (ascending nodes, positive weights summing to b - a).
    """
    if int(m) != m or m < 1:
        raise ValueError(f"Rule size must be a positive integer, got {m}.")
    if not a < b:
        raise ValueError(f"Interval [{a}, {b}] is empty.")
    nodes, weights = _reference_rule(int(m))
    half, mid = 0.5 * (b - a), 0.5 * (a + b)
    return mid + half * nodes, half * weights


def panel_edges(lower: float, upper: float, center: float, inner: float, levels: int) -> np.ndarray:
    """
    Breakpoints center +- r0 * 2^j clipped to [lower, upper].

    r0 is the smaller of ``inner`` and the distance to the farther end over
    2^levels, so at least ``levels`` geometric levels separate the innermost
    panels from the ends.
    """
    far = max(center - lower, upper - center)
    r0 = min(inner, far / 2.0 ** levels)
    count = int(math.ceil(math.log2(far / r0))) + 1
    radii = r0 * 2.0 ** np.arange(count)
    edges = np.concatenate([[lower, center, upper], center - radii, center + radii])
    edges = np.unique(np.clip(edges, lower, upper))
    keep = np.concatenate([[True], np.diff(edges) > 1e-12 * (upper - lower)])
    edges = edges[keep]
    edges[-1] = upper
    return edges


def composite_rule(edges, order: int, split: int = 1):
    """Gauss-Legendre nodes and weights over every panel of ``edges``, each cut into ``split`` equal pieces."""
    edges = np.asarray(edges, dtype=float)
    if split > 1:
        fractions = np.arange(split) / split
        starts = edges[:-1, None] + np.diff(edges)[:, None] * fractions[None, :]
        edges = np.append(starts.ravel(), edges[-1])
    ref_nodes, ref_weights = _reference_rule(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return nodes, weights


def tensor_quadrature(axes, integrand, workers: int = None) -> float:
    """
    Sum of integrand over the tensor product of per-axis rules.

    The first axis is cut into fixed chunks evaluated concurrently; partial
    sums are combined in chunk order, so the value does not depend on workers.

    Parameters:
        axes (list of (nodes, weights)): One rule per axis.
        integrand (callable): Maps an (N, d) array of points to N values.
        workers (int, optional): Executor size.
    """
    first_nodes, first_weights = axes[0]
    rest_weights = np.ones(1)
    for _, w in axes[1:]:
        rest_weights = np.multiply.outer(rest_weights, w).ravel()
    if len(axes) > 1:
        mesh = np.meshgrid(*[x for x, _ in axes[1:]], indexing="ij")
        rest_points = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        rest_points = np.zeros((1, 0))
    width = rest_points.shape[0]

    rows = max(1, CHUNK_POINTS // width)
    chunks = [np.arange(i, min(i + rows, first_nodes.size)) for i in range(0, first_nodes.size, rows)]

    def chunk_sum(index):
        column = np.repeat(first_nodes[index], width)[:, None]
        points = np.concatenate([column, np.tile(rest_points, (index.size, 1))], axis=1)
        values = np.asarray(integrand(points), dtype=float).reshape(index.size, width)
        return float(first_weights[index] @ (values @ rest_weights))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        partials = list(pool.map(chunk_sum, chunks))
    return float(np.sum(partials))


@dataclass(frozen=True)
class OracleResult:
    """
    Reference value I_n = exp(log_scale) * mantissa.

    Attributes:
        n (int): Large parameter.
        log_scale (float): n * h_n(center).
        mantissa (float): Integral of exp(n (h_n - h_n(center))) g over the box.
        est_error (float): Last successive-round difference (inf after a single round).
        converged (bool): Whether the difference met rel_tol within the node budget.
        total_nodes (int): Nodes used by the final round.
        rounds (int): Rounds evaluated.
        center (np.ndarray): Point the panels were refined toward.
    """

    n: int
    log_scale: float
    mantissa: float
    est_error: float
    converged: bool
    total_nodes: int
    rounds: int
    center: np.ndarray = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "log_scale": self.log_scale,
            "mantissa": self.mantissa,
            "est_error": self.est_error,
            "converged": self.converged,
            "total_nodes": self.total_nodes,
            "rounds": self.rounds,
        }


class QuadratureOracle:
    """
    Deterministic high-accuracy values of I_n by log-scaled Gauss-Legendre quadrature.

    Parameters:
        problem (ProblemSpec): The integral.
        config (QuadratureConfig, optional): Quadrature controls.
        logger (logging.Logger, optional): Logger.
        critical_config (CriticalConfig, optional): Used only when no center is given.
    """

    def __init__(self, problem: ProblemSpec, config: QuadratureConfig = None, logger: logging.Logger = None,
                 critical_config: CriticalConfig = None):
        self.problem = problem
        self.config = config or QuadratureConfig()
        self.logger = logger or logging.getLogger(__name__)
        self._analyzer = CriticalPointAnalyzer(problem, critical_config, self.logger)
        self._c = None

    def locate_center(self, n: int) -> np.ndarray:
        """c_n tracked from the maximizer of h (cached)."""
        if self._c is None:
            self._c = self._analyzer.find_maximizer()
        return self._analyzer.track(n, self._c)

    def _edges(self, center, n):
        prob, cfg = self.problem, self.config
        inner = 2.0 / math.sqrt(n)
        return [
            panel_edges(a, b, float(x), inner, cfg.refinement_levels)
            for (a, b), x in zip(prob.box, center)
        ]

    def _order_within_budget(self, edge_sets) -> int:
        cfg = self.config
        panels = [e.size - 1 for e in edge_sets]
        order = cfg.base_order
        if math.prod(p * order for p in panels) <= cfg.max_total_nodes:
            return order
        reduced = int((cfg.max_total_nodes / math.prod(panels)) ** (1.0 / len(panels)))
        while reduced >= 2 and math.prod(p * reduced for p in panels) > cfg.max_total_nodes:
            reduced -= 1
        if reduced < 2:
            self.logger.error(f"Node budget {cfg.max_total_nodes} cannot hold one pass over {panels} panels.")
            raise QuadratureError(f"Node budget {cfg.max_total_nodes} is too small for {panels} panels.")
        self.logger.warning(f"Panel order reduced from {order} to {reduced} to respect the node budget.")
        return reduced

    def integrand(self, n: int, center):
        """exp(n (h(x) - h(c_n)) + n eps_n (sigma(x) - sigma(c_n))) g(x), vectorized over points."""
        prob = self.problem
        eps = prob.epsilon(n)
        h_c = prob.h(center)
        sigma_c = prob.sigma(center)

        def evaluate(points):
            exponent = n * (prob.h(points) - h_c)
            if eps:
                exponent = exponent + n * eps * (prob.sigma(points) - sigma_c)
            return np.exp(exponent) * prob.g(points)

        return evaluate

    def reference_integral(self, n: int, center=None) -> OracleResult:
        """
        Compute I_n as (log_scale, mantissa) with an estimated error.

        Each round halves every panel; rounds stop when successive values agree
        to rel_tol. If the next round would exceed the node budget the last
        value is returned flagged non-converged.

        Parameters:
            n (int): Large parameter, n >= 1.
            center (array-like, optional): Maximizer c_n of h_n; located when omitted.

        Raises:
            QuadratureError: If the budget cannot fit even the first round.
        """
        prob, cfg = self.problem, self.config
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}.")
        center = self.locate_center(n) if center is None else np.asarray(center, dtype=float)
        if center.shape != (prob.dimension,):
            raise ValueError(f"Center has shape {center.shape}, expected ({prob.dimension},).")

        log_scale = n * prob.phase(center, n)
        integrand = self.integrand(n, center)
        edge_sets = self._edges(center, n)
        order = self._order_within_budget(edge_sets)

        previous, est_error, total = None, math.inf, 0
        for round_index in range(cfg.max_rounds):
            split = 2 ** round_index
            axes = [composite_rule(edges, order, split) for edges in edge_sets]
            nodes = math.prod(x.size for x, _ in axes)
            if nodes > cfg.max_total_nodes:
                self.logger.warning(
                    f"n={n}: node budget reached after {round_index} rounds; "
                    f"returning non-converged value (est_error {est_error:.3e})."
                )
                return OracleResult(n, log_scale, previous, est_error, False, total, round_index, center)

            value = tensor_quadrature(axes, integrand, cfg.workers)
            total = nodes
            if previous is not None:
                est_error = abs(value - previous)
                if est_error <= cfg.rel_tol * abs(value) or (value == 0.0 and previous == 0.0):
                    self.logger.info(
                        f"n={n}: oracle converged in {round_index + 1} rounds with {nodes} nodes "
                        f"(mantissa {value:.12e}, est_error {est_error:.2e})."
                    )
                    return OracleResult(n, log_scale, value, est_error, True, nodes, round_index + 1, center)
            previous = value

        self.logger.warning(f"n={n}: no convergence in {cfg.max_rounds} rounds (est_error {est_error:.3e}).")
        return OracleResult(n, log_scale, previous, est_error, False, total, cfg.max_rounds, center)


def reference_integral(prob: ProblemSpec, n: int, cfg: QuadratureConfig = None, center=None) -> OracleResult:
    return QuadratureOracle(prob, cfg).reference_integral(n, center)


def gaussian_moment_quadrature(a: SymMatrix, beta, order: int = 20, panels: int = 6, workers: int = None) -> float:
    """
    int exp(1/2 y^T A y) y^beta dy by tensor Gauss-Legendre on a box wide enough
    that the Gaussian tail beyond it is below exp(-42) times the peak.
    """
    beta = as_multi_index(beta)
    if beta.dimension != a.dim:
        raise ValueError(f"beta has dimension {beta.dimension}, matrix has {a.dim}.")
    eig = jacobi_eigen(a)
    if eig.eigenvalues[-1] >= 0.0:
        raise NotNegativeDefiniteError(f"Matrix is not negative definite (eigenvalues {eig.eigenvalues.tolist()}).")

    widest = abs(eig.eigenvalues[-1])
    half_width = math.sqrt(2.0 * (TAIL_LOG + 2.0 * beta.order) / widest)
    edges = np.linspace(-half_width, half_width, panels + 1)
    axes = [composite_rule(edges, order) for _ in range(a.dim)]
    matrix = a.entries
    powers = np.asarray(beta.entries)

    def integrand(points):
        quadratic = np.einsum("ni,ij,nj->n", points, matrix, points)
        return np.exp(0.5 * quadratic) * np.prod(points ** powers, axis=1)

    return tensor_quadrature(axes, integrand, workers)
