import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e

from scripts.exceptions import FieldError
from scripts.symmat import SymMatrix

MAX_DIMENSION = 6
MAX_DEGREE = 16

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiIndex:
    """
    A multi-index (alpha_1, ..., alpha_d) of non-negative integers.

    Parameters:
        entries (tuple of int): One entry per coordinate; the length is the ambient dimension.
    """

    entries: tuple

    def __post_init__(self):
        entries = tuple(int(a) for a in self.entries)
        if len(entries) < 1:
            raise FieldError("A multi-index needs at least one entry.")
        if any(a < 0 for a in entries):
            raise FieldError(f"Multi-index entries must be non-negative, got {entries}.")
        if any(a != b for a, b in zip(entries, self.entries)):
            raise FieldError(f"Multi-index entries must be integers, got {self.entries}.")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zeros(cls, dimension: int) -> "MultiIndex":
        return cls((0,) * dimension)

    @classmethod
    def unit(cls, dimension: int, axis: int, times: int = 1) -> "MultiIndex":
        entries = [0] * dimension
        entries[axis] = times
        return cls(tuple(entries))

    @property
    def dimension(self) -> int:
        return len(self.entries)

    @property
    def order(self) -> int:
        return sum(self.entries)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(a) for a in self.entries)

    @property
    def is_even(self) -> bool:
        return all(a % 2 == 0 for a in self.entries)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        other = as_multi_index(other)
        if other.dimension != self.dimension:
            raise FieldError("Cannot add multi-indices of different dimension.")
        return MultiIndex(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, item):
        return self.entries[item]

    def __str__(self):
        return "(" + ",".join(str(a) for a in self.entries) + ")"


def as_multi_index(alpha) -> MultiIndex:
    """Coerce a tuple/list (or an int, for d = 1) to a MultiIndex."""
    if isinstance(alpha, MultiIndex):
        return alpha
    if isinstance(alpha, (int, np.integer)):
        return MultiIndex((int(alpha),))
    return MultiIndex(tuple(alpha))


def _compositions(dimension: int, total: int):
    if dimension == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(dimension - 1, total - first):
            yield (first,) + rest


def enumerate_multi_indices(dimension: int, total: int, even_only: bool = False) -> list:
    """
    List every multi-index of the given dimension with |alpha| = total.

    Ordering is lexicographic with the first entry descending, so (2, 0) precedes (0, 2).

    Parameters:
        dimension (int): Ambient dimension d >= 1.
        total (int): Required order |alpha| >= 0.
        even_only (bool): Keep only indices whose entries are all even.

    Returns:
        list of MultiIndex: C(total + d - 1, d - 1) indices when unrestricted.
    """
    if dimension < 1 or total < 0:
        raise FieldError(f"Need dimension >= 1 and total >= 0, got d={dimension}, total={total}.")
    indices = [MultiIndex(entries) for entries in _compositions(dimension, total)]
    if even_only:
        indices = [alpha for alpha in indices if alpha.is_even]
    return indices


def multi_indices_up_to(dimension: int, max_total: int) -> list:
    """All multi-indices with |alpha| <= max_total, ordered by total."""
    result = []
    for total in range(max_total + 1):
        result.extend(enumerate_multi_indices(dimension, total))
    return result


class ScalarField:
    """
    Base class for d-variate scalar fields with a multi-index derivative oracle.

    Subclasses implement ``_partial(alpha, points)`` on a flat ``(N, d)`` array.
    Evaluation accepts a single point (shape ``(d,)``, or a scalar when d = 1)
    and returns a float, or a batch of shape ``(..., d)`` and returns an array
    of shape ``(...)``.
    """

    kind = "abstract"

    def __init__(self, dimension: int, max_order=None, name: str = ""):
        if not 1 <= dimension <= MAX_DIMENSION:
            raise FieldError(f"Dimension must lie in [1, {MAX_DIMENSION}], got {dimension}.")
        self._dimension = int(dimension)
        self._max_order = max_order
        self.name = name or self.kind

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def max_order(self):
        """Highest available derivative order, or None when unlimited."""
        return self._max_order

    def supports_order(self, order: int) -> bool:
        return self._max_order is None or order <= self._max_order

    def _check_alpha(self, alpha) -> MultiIndex:
        alpha = as_multi_index(alpha)
        if alpha.dimension != self._dimension:
            raise FieldError(
                f"Multi-index {alpha} has dimension {alpha.dimension}, field {self.name} has {self._dimension}."
            )
        if not self.supports_order(alpha.order):
            raise FieldError(
                f"Derivative order {alpha.order} exceeds the capability ({self._max_order}) of field {self.name}."
            )
        return alpha

    def _as_points(self, x):
        points = np.asarray(x, dtype=float)
        if points.ndim == 0:
            if self._dimension != 1:
                raise FieldError(f"Scalar point given to a {self._dimension}-variate field.")
            points = points.reshape(1)
        if points.shape[-1] != self._dimension:
            raise FieldError(
                f"Point dimension {points.shape[-1]} does not match field dimension {self._dimension}."
            )
        if not np.all(np.isfinite(points)):
            raise FieldError("Evaluation points must be finite.")
        return points

    def eval_partial(self, alpha, x):
        """
        Evaluate the partial derivative d^alpha f at x.

        Parameters:
            alpha (MultiIndex or tuple): Derivative multi-index; all zeros gives f(x).
            x (array-like): A point of shape (d,) or a batch of shape (..., d).

        Returns:
            float or np.ndarray: The derivative value(s).
        """
        alpha = self._check_alpha(alpha)
        points = self._as_points(x)
        batch_shape = points.shape[:-1]
        flat = points.reshape(-1, self._dimension)
        values = np.asarray(self._partial(alpha.entries, flat), dtype=float).reshape(batch_shape)
        if batch_shape == ():
            return float(values)
        return values

    def __call__(self, x):
        return self.eval_partial(MultiIndex.zeros(self._dimension), x)

    def gradient(self, x) -> np.ndarray:
        return self.derivative_tensor(1, x)

    def hessian(self, x) -> SymMatrix:
        return self.derivative_tensor(2, x)

    def hessian_array(self, x) -> np.ndarray:
        """Second-derivative arrays of shape (..., d, d) for a point or batch."""
        if not self.supports_order(2):
            raise FieldError(f"Field {self.name} does not provide second derivatives.")
        points = self._as_points(x)
        d = self._dimension
        out = np.empty(points.shape[:-1] + (d, d))
        for i in range(d):
            for j in range(i, d):
                value = self._mixed_second(i, j, points)
                out[..., i, j] = value
                out[..., j, i] = value
        return out

    def _mixed_second(self, i, j, points):
        return self.eval_partial(MultiIndex.unit(self._dimension, i) + MultiIndex.unit(self._dimension, j), points)

    def derivative_tensor(self, order: int, x):
        """
        Gradient (order 1) or Hessian (order 2) at a single point.

        Parameters:
            order (int): 1 or 2.
            x (array-like): A single point.

        Returns:
            np.ndarray or SymMatrix: The gradient vector or the symmetric Hessian.
        """
        if order not in (1, 2):
            raise FieldError(f"derivative_tensor supports order 1 or 2, got {order}.")
        if not self.supports_order(order):
            raise FieldError(f"Field {self.name} does not provide derivatives of order {order}.")
        point = self._as_points(x)
        if point.ndim != 1:
            raise FieldError("derivative_tensor expects a single point.")
        d = self._dimension
        if order == 1:
            return np.array([self.eval_partial(MultiIndex.unit(d, i), point) for i in range(d)])
        return SymMatrix(self.hessian_array(point))

    def _partial(self, alpha, points):
        raise NotImplementedError


class PolynomialField(ScalarField):
    """
    Multivariate polynomial given as (MultiIndex, coefficient) terms.

    Derivatives are exact: each term x^e differentiates to e!/(e - alpha)! x^(e - alpha).

    Parameters:
        dimension (int): Number of variables.
        terms (iterable): Pairs (exponent multi-index, real coefficient). Repeated exponents are summed.
        name (str, optional): Label used in logs and reports.
    """

    kind = "polynomial"

    def __init__(self, dimension: int, terms, name: str = ""):
        super().__init__(dimension, max_order=None, name=name)
        merged = {}
        for exponent, coeff in terms:
            exponent = as_multi_index(exponent)
            if exponent.dimension != dimension:
                raise FieldError(f"Term exponent {exponent} does not match dimension {dimension}.")
            if exponent.order > MAX_DEGREE:
                raise FieldError(f"Term degree {exponent.order} exceeds the cap {MAX_DEGREE}.")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise FieldError("Polynomial coefficients must be finite.")
            merged[exponent.entries] = merged.get(exponent.entries, 0.0) + coeff

        self._terms = [(MultiIndex(e), c) for e, c in merged.items() if c != 0.0]
        if self._terms:
            self._exponents = np.array([t.entries for t, _ in self._terms], dtype=int)
            self._coeffs = np.array([c for _, c in self._terms], dtype=float)
        else:
            self._exponents = np.zeros((0, dimension), dtype=int)
            self._coeffs = np.zeros(0)

    @classmethod
    def constant(cls, dimension: int, value: float, name: str = "") -> "PolynomialField":
        return cls(dimension, [(MultiIndex.zeros(dimension), value)], name=name or f"const({value})")

    @classmethod
    def zero(cls, dimension: int) -> "PolynomialField":
        return cls(dimension, [], name="zero")

    @classmethod
    def from_text(cls, text: str, dimension: int, name: str = "") -> "PolynomialField":
        """
        Parse the term format ``coeff a1 ... ad``, one term per line (or separated by ';').

        Blank lines and ``#`` comments are ignored; ``-0.5 2`` is -0.5*x^2 when d = 1.
        """
        terms = []
        for raw in text.replace(";", "\n").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != dimension + 1:
                raise FieldError(f"Term '{line}' needs 1 coefficient and {dimension} exponents.")
            try:
                coeff = float(parts[0])
                exponents = tuple(int(a) for a in parts[1:])
            except ValueError as exc:
                raise FieldError(f"Cannot parse polynomial term '{line}': {exc}") from exc
            terms.append((MultiIndex(exponents), coeff))
        return cls(dimension, terms, name=name)

    def to_text(self) -> str:
        return "\n".join(
            f"{coeff!r} " + " ".join(str(a) for a in exponent) for exponent, coeff in self._terms
        )

    @property
    def terms(self) -> list:
        return list(self._terms)

    @property
    def degree(self) -> int:
        return max((e.order for e, _ in self._terms), default=0)

    def _partial(self, alpha, points):
        alpha = np.asarray(alpha, dtype=int)
        alive = np.all(self._exponents >= alpha, axis=1)
        if not alive.any():
            return np.zeros(points.shape[0])
        exponents = self._exponents[alive]
        factors = np.array(
            [math.prod(math.perm(int(e), int(a)) for e, a in zip(row, alpha)) for row in exponents],
            dtype=float,
        )
        reduced = exponents - alpha
        monomials = np.prod(points[:, None, :] ** reduced[None, :, :], axis=2)
        return monomials @ (self._coeffs[alive] * factors)


def _gaussian_partial(alpha, points):
    values = np.ones(points.shape[0])
    for axis, order in enumerate(alpha):
        x = points[:, axis]
        hermite = hermite_e.hermeval(x, [0.0] * order + [1.0])
        values *= (-1.0) ** order * hermite * np.exp(-0.5 * x * x)
    return values


def _single_axis(alpha):
    active = [(axis, order) for axis, order in enumerate(alpha) if order > 0]
    if len(active) > 1:
        return None
    return active[0] if active else (None, 0)


def _cos_sum_partial(alpha, points):
    axis_order = _single_axis(alpha)
    if axis_order is None:
        return np.zeros(points.shape[0])
    axis, order = axis_order
    if axis is None:
        return np.cos(points).sum(axis=1)
    return np.cos(points[:, axis] + order * np.pi / 2.0)


def _exp_sum_partial(alpha, points):
    axis_order = _single_axis(alpha)
    if axis_order is None:
        return np.zeros(points.shape[0])
    axis, _ = axis_order
    if axis is None:
        return np.exp(points).sum(axis=1)
    return np.exp(points[:, axis])


def _neg_log_cosh_partial(alpha, points):
    axis_order = _single_axis(alpha)
    if axis_order is None:
        return np.zeros(points.shape[0])
    axis, order = axis_order
    if axis is None:
        return -(np.logaddexp(points, -points) - np.log(2.0)).sum(axis=1)
    x = points[:, axis]
    t = np.tanh(x)
    sech2 = 1.0 - t * t
    if order == 1:
        return -t
    if order == 2:
        return -sech2
    if order == 3:
        return 2.0 * sech2 * t
    return 2.0 * (sech2 * sech2 - 2.0 * sech2 * t * t)


# name -> (max derivative order or None, partial oracle)
BUILTINS = {
    "gaussian": (None, _gaussian_partial),
    "cos_sum": (None, _cos_sum_partial),
    "exp_sum": (None, _exp_sum_partial),
    "neg_log_cosh": (4, _neg_log_cosh_partial),
}


class BuiltinField(ScalarField):
    """
    A registered closed-form field with analytic partial derivatives, times a scale.

    Parameters:
        name (str): One of ``BUILTINS``.
        dimension (int): Number of variables.
        scale (float): Constant multiplier.
    """

    kind = "builtin"

    def __init__(self, name: str, dimension: int, scale: float = 1.0):
        if name not in BUILTINS:
            raise FieldError(f"Unknown builtin field '{name}'. Known: {sorted(BUILTINS)}.")
        max_order, oracle = BUILTINS[name]
        super().__init__(dimension, max_order=max_order, name=name)
        self.builtin = name
        self.scale = float(scale)
        self._oracle = oracle

    def _partial(self, alpha, points):
        return self.scale * self._oracle(alpha, points)


class NumericField(ScalarField):
    """
    Evaluation-only field; partial derivatives come from nested central differences.

    The step along axis i for a derivative of total order m is
    max(1, |x_i|) * eps**(1 / (m + 2)), rounded so that x + h is representable.

    Parameters:
        func (callable): Vectorized function mapping an (N, d) array to N values.
        dimension (int): Number of variables.
        max_order (int): Highest derivative order that may be requested.
    """

    kind = "numeric"

    def __init__(self, func, dimension: int, max_order: int = 3, name: str = ""):
        super().__init__(dimension, max_order=int(max_order), name=name or "numeric")
        self._func = func

    def _steps(self, points, order):
        base = np.finfo(float).eps ** (1.0 / (order + 2))
        raw = np.maximum(1.0, np.abs(points)) * base
        return (points + raw) - points

    def _nested(self, axes, points, steps):
        if not axes:
            return np.asarray(self._func(points), dtype=float)
        axis, rest = axes[0], axes[1:]
        shift = np.zeros_like(points)
        shift[:, axis] = steps[:, axis]
        forward = self._nested(rest, points + shift, steps)
        backward = self._nested(rest, points - shift, steps)
        return (forward - backward) / (2.0 * steps[:, axis])

    def _partial(self, alpha, points):
        axes = [axis for axis, order in enumerate(alpha) for _ in range(order)]
        steps = self._steps(points, len(axes))
        return self._nested(axes, points, steps)

    def _mixed_second(self, i, j, points):
        flat = points.reshape(-1, self._dimension)
        steps = self._steps(flat, 2)
        if i == j:
            value = self._nested([i, i], flat, steps)
        else:
            value = 0.5 * (self._nested([i, j], flat, steps) + self._nested([j, i], flat, steps))
        return value.reshape(points.shape[:-1])
