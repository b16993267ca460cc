import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from scripts.exceptions import (
    AssumptionViolation,
    BoundaryMaximumError,
    FieldError,
    NewtonConvergenceError,
)
from scripts.fields import PolynomialField, ScalarField, enumerate_multi_indices, multi_indices_up_to
from scripts.rates import DriftFit, fit_residuals
from scripts.symmat import (
    EigenDecomposition,
    SymMatrix,
    adjugate,
    determinant,
    hs_norm,
    is_negative_definite,
    jacobi_eigen,
    weyl_gap,
)


@dataclass(frozen=True)
class ProblemSpec:
    """
    A Laplace-type integral I_n = int_box exp(n (h + eps_n sigma)) g dx.

    Parameters:
        box (sequence of (a, b)): Per-axis intervals with a < b.
        h (ScalarField): Phase function.
        sigma (ScalarField or None): Perturbation direction; None means sigma = 0.
        g (ScalarField): Amplitude.
        p (float): Decay exponent of eps_n = s * n^-p.
        s (float): Perturbation amplitude; s = 0 encodes sigma = 0 (p treated as +inf).
        k (int): Even degeneracy order of g at the maximizer.
        name (str): Label used in reports.
    """

    box: tuple
    h: ScalarField
    sigma: ScalarField
    g: ScalarField
    p: float = math.inf
    s: float = 0.0
    k: int = 0
    name: str = ""

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        if not box:
            raise ValueError("The box needs at least one axis.")
        for axis, (a, b) in enumerate(box):
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValueError(f"Axis {axis} interval [{a}, {b}] is degenerate or unbounded.")
        object.__setattr__(self, "box", box)

        d = len(box)
        sigma = self.sigma if self.sigma is not None else PolynomialField.zero(d)
        object.__setattr__(self, "sigma", sigma)
        for label, fld in (("h", self.h), ("sigma", sigma), ("g", self.g)):
            if fld.dimension != d:
                raise ValueError(f"Field {label} has dimension {fld.dimension}, box has {d}.")

        if self.s < 0:
            raise ValueError(f"Perturbation amplitude s must be >= 0, got {self.s}.")
        if self.s > 0 and not self.p > 0:
            raise ValueError(f"Decay exponent p must be > 0, got {self.p}.")
        if int(self.k) != self.k or self.k < 0 or self.k % 2:
            raise ValueError(f"Degeneracy order k must be an even integer >= 0, got {self.k}.")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", float(self.p))

    @property
    def dimension(self) -> int:
        return len(self.box)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.box])

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def is_perturbed(self) -> bool:
        return self.s > 0.0

    @property
    def effective_p(self) -> float:
        return self.p if self.is_perturbed else math.inf

    def epsilon(self, n) -> float:
        """eps_n = s * n^-p; zero when unperturbed or n is None."""
        if n is None or not self.is_perturbed:
            return 0.0
        return self.s * float(n) ** (-self.p)

    def distance_to_boundary(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.min(np.minimum(x - self.lower, self.upper - x)))

    def phase(self, x, n=None):
        eps = self.epsilon(n)
        value = self.h(x)
        return value + eps * self.sigma(x) if eps else value

    def phase_partial(self, alpha, x, n=None):
        eps = self.epsilon(n)
        value = self.h.eval_partial(alpha, x)
        return value + eps * self.sigma.eval_partial(alpha, x) if eps else value

    def phase_gradient(self, x, n=None) -> np.ndarray:
        eps = self.epsilon(n)
        grad = self.h.gradient(x)
        return grad + eps * self.sigma.gradient(x) if eps else grad

    def phase_hessian(self, x, n=None) -> SymMatrix:
        eps = self.epsilon(n)
        hess = self.h.hessian(x)
        return hess + eps * self.sigma.hessian(x) if eps else hess


@dataclass(frozen=True)
class CriticalConfig:
    """Tolerances and sampling controls for maximizer search and assumption checks."""

    newton_tol: float = 1e-12
    max_newton_iter: int = 50
    grid_per_axis: int = 41
    max_grid_points: int = 10 ** 6
    delta: float = None
    zero_tol: float = 1e-9
    det_floor: float = 1e-8
    definiteness_tol: float = 1e-8
    margin: float = None
    workers: int = None

    def __post_init__(self):
        if self.grid_per_axis < 3:
            raise ValueError("grid_per_axis must be at least 3.")
        if self.newton_tol <= 0 or self.max_newton_iter < 1:
            raise ValueError("Newton tolerance must be positive and the iteration cap at least 1.")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive.")


def sample_grid(box, grid_per_axis: int, max_points: int = 10 ** 6):
    """
    Uniform tensor grid over the box, thinned so the total stays within max_points.

    Returns:
        tuple: (points of shape (N, d), nodes per axis actually used).
    """
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    per_axis = int(grid_per_axis)
    while per_axis > 3 and per_axis ** d > max_points:
        per_axis -= 1
    axes = [np.linspace(a, b, per_axis) for a, b in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    return points, per_axis


def _default_margin(box, per_axis: int) -> float:
    widths = np.asarray(box, dtype=float)[:, 1] - np.asarray(box, dtype=float)[:, 0]
    return 0.5 * float(np.min(widths)) / (per_axis - 1)


def _inside(x, lower, upper) -> bool:
    return bool(np.all(x > lower) and np.all(x < upper))


def damped_newton(value_fn, grad_fn, hess_fn, start, lower, upper, tol=1e-12, max_iter=50, logger=None):
    """
    Maximize by Newton steps on the gradient, halving each step until the
    objective increases (or, at round-off level, the gradient shrinks).

    Returns:
        tuple: (point, iterations, final gradient norm).

    Raises:
        NewtonConvergenceError: When max_iter iterations do not reach ||grad|| < tol.
    """
    logger = logger or logging.getLogger(__name__)
    x = np.array(start, dtype=float)
    for iteration in range(max_iter + 1):
        grad = np.asarray(grad_fn(x), dtype=float)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tol:
            return x, iteration, grad_norm
        if iteration == max_iter:
            break

        hess = hess_fn(x).entries
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad.copy()
        if step @ grad <= 0.0:
            step = grad / max(1.0, hs_norm(hess))

        current = value_fn(x)
        t = 1.0
        while True:
            candidate = x + t * step
            if _inside(candidate, lower, upper):
                if value_fn(candidate) > current:
                    break
                if np.linalg.norm(grad_fn(candidate)) < grad_norm:
                    break
            t *= 0.5
            if t < 1e-16:
                logger.error(f"Line search stalled at {x.tolist()} with |grad| = {grad_norm:.3e}.")
                raise NewtonConvergenceError(f"Damped Newton stalled at {x.tolist()} (|grad| = {grad_norm:.3e}).")
        x = candidate

    logger.error(f"Damped Newton did not converge in {max_iter} iterations (|grad| = {grad_norm:.3e}).")
    raise NewtonConvergenceError(f"Damped Newton did not converge in {max_iter} iterations.")


def find_max_interior(f: ScalarField, box, grid_per_axis: int = 41, margin: float = None,
                      tol: float = 1e-12, max_iter: int = 50, max_points: int = 10 ** 6,
                      logger=None) -> np.ndarray:
    """
    Locate the interior maximizer of f on the box.

    Evaluates f on a uniform grid, takes the best point and refines it with
    damped Newton to ||grad f|| < tol.

    Parameters:
        f (ScalarField): Field to maximize.
        box (array-like): (d, 2) per-axis intervals.
        grid_per_axis (int): Grid nodes per axis (>= 3).
        margin (float, optional): Minimum distance to the boundary; defaults to half a grid spacing.

    Returns:
        np.ndarray: The maximizer.

    Raises:
        BoundaryMaximumError: If the best grid point or the refined point is within margin of the boundary.
        NewtonConvergenceError: If Newton does not converge.
    """
    logger = logger or logging.getLogger(__name__)
    box = np.asarray(box, dtype=float)
    lower, upper = box[:, 0], box[:, 1]
    if grid_per_axis < 3:
        raise ValueError("grid_per_axis must be at least 3.")
    points, per_axis = sample_grid(box, grid_per_axis, max_points)
    if margin is None:
        margin = _default_margin(box, per_axis)
    if not 0.0 < margin < float(np.min(0.5 * (upper - lower))):
        raise ValueError(f"margin {margin} must lie strictly between 0 and the smallest half-width.")

    values = np.asarray(f(points))
    best = points[int(np.argmax(values))]
    distance = float(np.min(np.minimum(best - lower, upper - best)))
    if distance < margin:
        logger.error(f"Grid maximum of {f.name} at {best.tolist()} lies on the boundary.")
        raise BoundaryMaximumError(f"Maximum of {f.name} attained at the boundary point {best.tolist()}.")

    point, iterations, grad_norm = damped_newton(
        f, f.gradient, f.hessian, best, lower, upper, tol=tol, max_iter=max_iter, logger=logger
    )
    if float(np.min(np.minimum(point - lower, upper - point))) < margin:
        logger.error(f"Newton drifted to {point.tolist()}, within {margin} of the boundary.")
        raise BoundaryMaximumError(f"Refined maximizer {point.tolist()} is within the boundary margin.")
    logger.info(f"Maximizer of {f.name} at {point.tolist()} after {iterations} Newton steps (|grad| {grad_norm:.2e}).")
    return point


@dataclass(frozen=True)
class CriticalPointRecord:
    """Maximizer c_n of h_n and the spectral data of D^2 h_n(c_n) for one n."""

    n: int
    epsilon: float
    c_n: np.ndarray
    grad_norm: float
    hessian: SymMatrix
    eigenvalues: np.ndarray
    determinant: float
    shift_error: float = 0.0
    perturbation_gap: float = 0.0
    perturbation_bound: float = 0.0
    displacement_gap: float = 0.0
    displacement_bound: float = 0.0


@dataclass(frozen=True)
class AssumptionFlag:
    """Outcome of one assumption check; ``hard`` failures block the theorem experiment."""

    tag: str
    passed: bool
    hard: bool
    required: bool = True
    detail: str = ""

    @property
    def status(self) -> str:
        if not self.required:
            return "not-required"
        return "pass" if self.passed else ("fail" if self.hard else "warn")


@dataclass
class CriticalReport:
    """
    Maximizer c of h, the tracked maximizers c_n of h_n, and the assumption flags.

    tail_gap is A = min over the sampled box outside B_delta(c) of h(c) - h(x);
    eigen_floor is C-dagger = min over recorded n of sum_i lambda_{i,n}(c_n)^2.
    """

    c: np.ndarray
    value: float
    grad_norm: float
    hessian: SymMatrix
    eigen: EigenDecomposition
    determinant: float
    records: list = field(default_factory=list)
    tail_gap: float = math.nan
    delta: float = math.nan
    eigen_floor: float = math.nan
    min_grid_det: float = math.nan
    derivative_sup: dict = field(default_factory=dict)
    grid_per_axis: int = 0
    flags: dict = field(default_factory=dict)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigen.eigenvalues

    @property
    def hard_failures(self) -> list:
        return [tag for tag, flag in self.flags.items() if flag.required and flag.hard and not flag.passed]

    @property
    def warnings(self) -> list:
        return [tag for tag, flag in self.flags.items() if flag.required and not flag.hard and not flag.passed]

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def raise_for_violations(self):
        failures = self.hard_failures
        if failures:
            details = "; ".join(f"{tag}: {self.flags[tag].detail}" for tag in failures)
            raise AssumptionViolation(failures, details)

    def record_for(self, n):
        for record in self.records:
            if record.n == n:
                return record
        return None

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.records:
            rows.append({
                "n": r.n,
                "epsilon": r.epsilon,
                "c_n": r.c_n.tolist(),
                "grad_norm": r.grad_norm,
                "eigenvalues": r.eigenvalues.tolist(),
                "det": r.determinant,
                "shift_error": r.shift_error,
                "weyl_perturbation": r.perturbation_gap,
                "weyl_perturbation_bound": r.perturbation_bound,
                "weyl_displacement": r.displacement_gap,
                "weyl_displacement_bound": r.displacement_bound,
            })
        return pd.DataFrame(rows)

    def flags_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"assumption": f.tag, "status": f.status, "hard": f.hard, "detail": f.detail}
             for f in self.flags.values()]
        )

    def summary(self) -> dict:
        return {
            "c": self.c.tolist(),
            "h(c)": self.value,
            "grad_norm": self.grad_norm,
            "eigenvalues": self.eigenvalues.tolist(),
            "det": self.determinant,
            "tail_gap": self.tail_gap,
            "delta": self.delta,
            "eigen_floor": self.eigen_floor,
            "min_grid_det": self.min_grid_det,
            "grid_per_axis": self.grid_per_axis,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class DriftRates:
    """Fitted drift rates of c_n, det D^2 h_n(c_n) and each sorted eigenvalue."""

    cn_fit: DriftFit
    det_fit: DriftFit
    eigen_fits: list
    table: pd.DataFrame


def newton_shift(prob: ProblemSpec, n, c) -> np.ndarray:
    """
    First-order shift a_n with c_n - c ~ eps_n a_n.

    a_n = -adj(D^2 h_n(c)) grad sigma(c) / det D^2 h_n(c).
    """
    hess = prob.phase_hessian(c, n)
    det = determinant(hess)
    return -(adjugate(hess).entries @ prob.sigma.gradient(c)) / det


class CriticalPointAnalyzer:
    """
    Maximizers of h and h_n, assumption checks, and perturbation drift rates.

    Parameters:
        problem (ProblemSpec): The integral under study.
        config (CriticalConfig, optional): Tolerances and grid controls.
        logger (logging.Logger, optional): Logger for progress and failures.
    """

    def __init__(self, problem: ProblemSpec, config: CriticalConfig = None, logger: logging.Logger = None):
        self.problem = problem
        self.config = config or CriticalConfig()
        self.logger = logger or logging.getLogger(__name__)
        self._box = np.array(problem.box)

    def find_maximizer(self, grid_per_axis: int = None) -> np.ndarray:
        cfg = self.config
        return find_max_interior(
            self.problem.h, self._box,
            grid_per_axis=grid_per_axis or cfg.grid_per_axis,
            margin=cfg.margin, tol=cfg.newton_tol, max_iter=cfg.max_newton_iter,
            max_points=cfg.max_grid_points, logger=self.logger,
        )

    def track(self, n: int, start) -> np.ndarray:
        """Newton-track c_n from start and require a negative-definite Hessian there."""
        prob, cfg = self.problem, self.config
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}.")
        if not prob.is_perturbed:
            return np.array(start, dtype=float)
        c_n, _, _ = damped_newton(
            lambda x: prob.phase(x, n),
            lambda x: prob.phase_gradient(x, n),
            lambda x: prob.phase_hessian(x, n),
            start, prob.lower, prob.upper,
            tol=cfg.newton_tol, max_iter=cfg.max_newton_iter, logger=self.logger,
        )
        if not is_negative_definite(prob.phase_hessian(c_n, n), cfg.definiteness_tol):
            self.logger.error(f"D^2 h_n(c_n) is not negative definite at n={n}.")
            raise AssumptionViolation(["A(iii)"], f"Hessian of h_n at c_n is not negative definite for n={n}")
        return c_n

    def make_record(self, n, c, c_n, c_hessian) -> CriticalPointRecord:
        prob = self.problem
        eps = prob.epsilon(n)
        hess_n = prob.phase_hessian(c_n, n)
        eig_n = jacobi_eigen(hess_n)
        record = dict(
            n=int(n), epsilon=eps, c_n=np.asarray(c_n, dtype=float),
            grad_norm=float(np.linalg.norm(prob.phase_gradient(c_n, n))),
            hessian=hess_n, eigenvalues=eig_n.eigenvalues,
            determinant=float(np.prod(eig_n.eigenvalues)),
        )
        if prob.is_perturbed:
            predicted = c + eps * newton_shift(prob, n, c)
            unperturbed_at_cn = prob.h.hessian(c_n)
            split_perturbation = weyl_gap(hess_n, unperturbed_at_cn)
            split_displacement = weyl_gap(unperturbed_at_cn, c_hessian)
            record.update(
                shift_error=float(np.linalg.norm(c_n - predicted)),
                perturbation_gap=split_perturbation.gap,
                perturbation_bound=eps * hs_norm(prob.sigma.hessian(c_n)),
                displacement_gap=split_displacement.gap,
                displacement_bound=split_displacement.bound,
            )
        return CriticalPointRecord(**record)

    def track_all(self, n_list, c, c_hessian) -> list:
        """Warm-started tracking in ascending n; each c_n starts from the previous one."""
        records = []
        start = np.asarray(c, dtype=float)
        for n in sorted(set(int(n) for n in n_list)):
            c_n = self.track(n, start)
            records.append(self.make_record(n, c, c_n, c_hessian))
            self.logger.info(f"n={n}: c_n={c_n.tolist()}, eps_n={self.problem.epsilon(n):.3e}.")
            start = c_n
        return records

    def _tail_gap(self, c, points, values, h_c, delta) -> float:
        prob = self.problem
        offsets = points - c
        distances = np.linalg.norm(offsets, axis=1)
        outside = distances >= delta
        candidates = [values[outside]]

        d = prob.dimension
        directions = [np.eye(d), -np.eye(d)]
        inner = (~outside) & (distances > 0.0)
        if inner.any():
            directions.append(offsets[inner] / distances[inner, None])
        sphere = c + delta * np.concatenate(directions)
        in_box = np.all((sphere >= prob.lower) & (sphere <= prob.upper), axis=1)
        if in_box.any():
            candidates.append(np.asarray(prob.h(sphere[in_box])))

        pool = np.concatenate(candidates)
        if pool.size == 0:
            return math.inf
        return float(h_c - np.max(pool))

    def _grid_derivatives(self, points, order):
        prob = self.problem
        result = {}
        for alpha in enumerate_multi_indices(prob.dimension, order):
            result[alpha] = (prob.h.eval_partial(alpha, points), prob.sigma.eval_partial(alpha, points))
        return result

    def _min_grid_det(self, hess_h, hess_sigma, eps) -> float:
        return float(np.min(np.abs(np.linalg.det(hess_h + eps * hess_sigma))))

    def verify_assumptions(self, n_list, grid_per_axis: int = None) -> CriticalReport:
        """
        Check Assumptions (A)(ii)-(vi) and (B) on a sample grid and at c, c_n.

        Hard flags: A(ii), A(iii), A(vi), B. Soft (grid-certified) flags: A(iv), A(v).
        With s = 0 only A(ii) and B are required.

        Raises:
            AssumptionViolation: Only when no interior maximizer of h exists at all;
                every other failure is recorded in the report flags.
        """
        prob, cfg = self.problem, self.config
        n_list = sorted(set(int(n) for n in n_list))
        if not n_list:
            raise ValueError("n_list must be nonempty.")
        perturbed = prob.is_perturbed
        flags = {}

        try:
            c = self.find_maximizer(grid_per_axis)
        except (BoundaryMaximumError, NewtonConvergenceError) as exc:
            raise AssumptionViolation(["A(ii)"], str(exc)) from exc

        h_c = prob.h(c)
        c_hessian = prob.h.hessian(c)
        eig = jacobi_eigen(c_hessian)
        det = float(np.prod(eig.eigenvalues))
        grad_norm = float(np.linalg.norm(prob.h.gradient(c)))

        points, per_axis = sample_grid(self._box, grid_per_axis or cfg.grid_per_axis, cfg.max_grid_points)
        values = np.asarray(prob.h(points))
        delta = cfg.delta or 0.25 * float(np.min(prob.half_widths))
        tail_gap = self._tail_gap(c, points, values, h_c, delta)

        negative = bool(eig.eigenvalues[-1] < -cfg.definiteness_tol)
        ok_ii = abs(det) > cfg.det_floor and negative and tail_gap > 0.0
        flags["A(ii)"] = AssumptionFlag(
            "A(ii)", ok_ii, hard=True,
            detail=f"c={np.round(c, 12).tolist()}, det={det:.6g}, tail gap A={tail_gap:.6g} (delta={delta:.4g})",
        )

        records = []
        try:
            records = self.track_all(n_list, c, c_hessian)
            ok_iii, detail_iii = True, f"tracked {len(records)} values of n"
        except (AssumptionViolation, NewtonConvergenceError, BoundaryMaximumError) as exc:
            ok_iii, detail_iii = False, str(exc)
            self.logger.warning(f"c_n tracking failed: {exc}")
        flags["A(iii)"] = AssumptionFlag("A(iii)", ok_iii, hard=True, required=perturbed, detail=detail_iii)

        hess_h = prob.h.hessian_array(points)
        hess_sigma = prob.sigma.hessian_array(points)
        epsilons = [prob.epsilon(n) for n in n_list] if perturbed else [0.0]
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            dets = list(pool.map(lambda eps: self._min_grid_det(hess_h, hess_sigma, eps), epsilons))
        min_grid_det = min(dets)
        flags["A(iv)"] = AssumptionFlag(
            "A(iv)", min_grid_det > cfg.det_floor, hard=False, required=perturbed,
            detail=f"min |det D^2 h_n| over {per_axis}^{prob.dimension} grid = {min_grid_det:.6g}",
        )

        derivative_sup = {}
        try:
            for order in (2, 3):
                for alpha, (dh, ds) in self._grid_derivatives(points, order).items():
                    sup = max(float(np.max(np.abs(dh + eps * ds))) for eps in epsilons)
                    derivative_sup[str(alpha)] = sup
            ok_v = all(math.isfinite(v) for v in derivative_sup.values())
            detail_v = f"max sup |d^alpha h_n| = {max(derivative_sup.values()):.6g}"
        except FieldError as exc:
            ok_v, detail_v = False, str(exc)
        flags["A(v)"] = AssumptionFlag("A(v)", ok_v, hard=False, required=perturbed, detail=detail_v)

        spectra = [np.sum(r.eigenvalues ** 2) for r in records] or [float(np.sum(eig.eigenvalues ** 2))]
        eigen_floor = float(min(spectra))
        flags["A(vi)"] = AssumptionFlag(
            "A(vi)", eigen_floor > 0.0 and ok_iii, hard=True, required=perturbed,
            detail=f"C_dagger = {eigen_floor:.6g}",
        )

        flags["B"] = self._check_amplitude(c)

        report = CriticalReport(
            c=c, value=h_c, grad_norm=grad_norm, hessian=c_hessian, eigen=eig, determinant=det,
            records=records, tail_gap=tail_gap, delta=delta, eigen_floor=eigen_floor,
            min_grid_det=min_grid_det, derivative_sup=derivative_sup, grid_per_axis=per_axis, flags=flags,
        )
        for tag in report.warnings:
            self.logger.warning(f"Assumption {tag} flagged: {flags[tag].detail}")
        for tag in report.hard_failures:
            self.logger.error(f"Assumption {tag} failed: {flags[tag].detail}")
        self.logger.info(f"Assumption check for '{prob.name}': {'passed' if report.passed else 'FAILED'}.")
        return report

    def _check_amplitude(self, c) -> AssumptionFlag:
        prob, cfg = self.problem, self.config
        g, k = prob.g, prob.k
        if not g.supports_order(k):
            return AssumptionFlag("B", False, hard=True, detail=f"g provides derivatives only up to {g.max_order}")
        if k == 0:
            value = g(c)
            return AssumptionFlag("B", abs(value) > cfg.zero_tol, hard=True, detail=f"g(c) = {value:.6g}")

        nonzero_low = [
            str(alpha) for alpha in multi_indices_up_to(prob.dimension, k - 1)
            if abs(g.eval_partial(alpha, c)) > cfg.zero_tol
        ]
        even_top = {
            str(beta): g.eval_partial(beta, c)
            for beta in enumerate_multi_indices(prob.dimension, k, even_only=True)
        }
        has_even = any(abs(v) > cfg.zero_tol for v in even_top.values())
        if nonzero_low:
            detail = f"derivatives of order < {k} do not vanish at c: {nonzero_low}"
        elif not has_even:
            detail = f"every even derivative of order {k} vanishes at c"
        else:
            detail = f"even order-{k} derivatives at c: {even_top}"
        return AssumptionFlag("B", not nonzero_low and has_even, hard=True, detail=detail)

    def drift_rates(self, n_list, report: CriticalReport = None) -> DriftRates:
        """
        Fit |c_n - c|, |det D^2 h_n(c_n) - det D^2 h(c)| and |lambda_{i,n}(c_n) - lambda_i(c)| against n.

        Eigenvalues are paired in ascending order. Sequences that never reach
        the 1e-14 floor are reported exact instead of fitted.
        """
        prob = self.problem
        ns = sorted(set(int(n) for n in n_list))
        if not prob.is_perturbed:
            raise ValueError("drift_rates needs a perturbed problem (s > 0).")
        if len(ns) < 4 or ns[-1] < 100 * ns[0]:
            raise ValueError("drift_rates needs at least 4 distinct n spanning two decades.")

        if report is None:
            c = self.find_maximizer()
            c_hessian = prob.h.hessian(c)
            base_eig = jacobi_eigen(c_hessian).eigenvalues
            records = self.track_all(ns, c, c_hessian)
        else:
            c, base_eig = report.c, report.eigenvalues
            records = [report.record_for(n) for n in ns]
            if any(r is None for r in records):
                records = self.track_all(ns, c, report.hessian)
        base_det = float(np.prod(base_eig))

        rows = []
        for r in records:
            row = {
                "n": r.n,
                "epsilon": r.epsilon,
                "cn_drift": float(np.linalg.norm(r.c_n - c)),
                "det_drift": abs(r.determinant - base_det),
            }
            for i, (lam_n, lam) in enumerate(zip(r.eigenvalues, base_eig)):
                row[f"eigen_drift_{i + 1}"] = abs(lam_n - lam)
            rows.append(row)
        table = pd.DataFrame(rows)

        cn_fit = fit_residuals("cn", table["n"], table["cn_drift"])
        det_fit = fit_residuals("det", table["n"], table["det_drift"])
        eigen_fits = [
            fit_residuals(f"eigen_{i + 1}", table["n"], table[f"eigen_drift_{i + 1}"])
            for i in range(prob.dimension)
        ]
        return DriftRates(cn_fit=cn_fit, det_fit=det_fit, eigen_fits=eigen_fits, table=table)


def track_c_n(prob: ProblemSpec, n: int, start, config: CriticalConfig = None) -> np.ndarray:
    """Maximizer c_n of h_n found by damped Newton from start (c or a previous c_n)."""
    return CriticalPointAnalyzer(prob, config).track(n, start)


def verify_assumptions(prob: ProblemSpec, n_list, grid_per_axis: int = 41, config: CriticalConfig = None) -> CriticalReport:
    return CriticalPointAnalyzer(prob, config).verify_assumptions(n_list, grid_per_axis)


def drift_rates(prob: ProblemSpec, n_list, config: CriticalConfig = None) -> DriftRates:
    return CriticalPointAnalyzer(prob, config).drift_rates(n_list)
