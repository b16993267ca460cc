import logging
from dataclasses import dataclass

import numpy as np

from scripts.exceptions import EigenConvergenceError, LaplaceAsymError

logger = logging.getLogger(__name__)

OFF_DIAGONAL_TOL = 1e-13


class SymMatrix:
    """
    Dense real symmetric d x d matrix.

    The input is symmetrized as (A + A^T) / 2 at construction, which makes
    entries[i][j] == entries[j][i] hold bit for bit.

    Parameters:
        entries (array-like): Square matrix of finite reals.
    """

    def __init__(self, entries):
        array = np.array(entries, dtype=float)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise LaplaceAsymError(f"SymMatrix needs a square matrix, got shape {array.shape}.")
        if not np.all(np.isfinite(array)):
            raise LaplaceAsymError("SymMatrix entries must be finite.")
        self._entries = 0.5 * (array + array.T)
        self._entries.setflags(write=False)

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the symmetric entries."""
        return self._entries

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        _check_same_dim(self, other)
        return SymMatrix(self._entries - other._entries)

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        _check_same_dim(self, other)
        return SymMatrix(self._entries + other._entries)

    def __mul__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(self._entries * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymMatrix({self._entries.tolist()})"


def _check_same_dim(a: SymMatrix, b: SymMatrix):
    if a.dim != b.dim:
        raise LaplaceAsymError(f"Dimension mismatch: {a.dim} vs {b.dim}.")


@dataclass(frozen=True)
class EigenDecomposition:
    """
    Spectral decomposition A = basis @ diag(eigenvalues) @ basis.T.

    Attributes:
        eigenvalues (np.ndarray): Ascending eigenvalues.
        basis (np.ndarray): Orthogonal matrix whose columns are the matching eigenvectors.
        sweeps (int): Jacobi sweeps used.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.T


def hs_norm(a) -> float:
    """Hilbert-Schmidt (Frobenius) norm sqrt(sum_ij A_ij^2)."""
    entries = a.entries if isinstance(a, SymMatrix) else np.asarray(a, dtype=float)
    return float(np.linalg.norm(entries, "fro"))


def _off_diagonal_mass(work: np.ndarray) -> float:
    return float(np.linalg.norm(work - np.diag(np.diag(work)), "fro"))


def jacobi_eigen(a: SymMatrix) -> EigenDecomposition:
    """
    Cyclic Jacobi eigen-solver for a symmetric matrix.

    Sweeps over all (p, q) pairs, annihilating a_pq with a plane rotation, until
    the off-diagonal Hilbert-Schmidt mass drops below 1e-13 * ||A||_2.

    Parameters:
        a (SymMatrix): Symmetric input.

    Returns:
        EigenDecomposition: Ascending eigenvalues and orthogonal eigenvectors.

    Raises:
        EigenConvergenceError: After 30 * d^2 sweeps without convergence.
    """
    work = np.array(a.entries, dtype=float)
    d = work.shape[0]
    basis = np.eye(d)
    scale = hs_norm(a)
    threshold = OFF_DIAGONAL_TOL * scale
    max_sweeps = 30 * d * d

    sweeps = 0
    while _off_diagonal_mass(work) > threshold:
        if sweeps >= max_sweeps:
            logger.error(f"Jacobi did not converge after {sweeps} sweeps (d={d}).")
            raise EigenConvergenceError(f"Jacobi eigen-solver did not converge after {sweeps} sweeps.")
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c

                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                work[p, q] = work[q, p] = 0.0

                vec_p = basis[:, p].copy()
                vec_q = basis[:, q].copy()
                basis[:, p] = c * vec_p - s * vec_q
                basis[:, q] = s * vec_p + c * vec_q
        sweeps += 1

    eigenvalues = np.diag(work).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return EigenDecomposition(eigenvalues=eigenvalues[order], basis=basis[:, order], sweeps=sweeps)


def eigenvalues(a: SymMatrix) -> np.ndarray:
    return jacobi_eigen(a).eigenvalues


def determinant(a: SymMatrix) -> float:
    """Determinant as the product of the Jacobi eigenvalues (sign preserved)."""
    return float(np.prod(jacobi_eigen(a).eigenvalues))


def adjugate(a: SymMatrix) -> SymMatrix:
    """
    Adjugate (transposed cofactor matrix), defined even when det(A) = 0.

    Satisfies A @ adj(A) = det(A) * I.
    """
    entries = a.entries
    d = a.dim
    if d == 1:
        return SymMatrix([[1.0]])
    cofactors = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            minor = np.delete(np.delete(entries, i, axis=0), j, axis=1)
            cofactors[i, j] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return SymMatrix(cofactors.T)


@dataclass(frozen=True)
class WeylGap:
    """Largest sorted-eigenvalue shift and its Hilbert-Schmidt bound."""

    gap: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.gap <= self.bound + 1e-9


def weyl_gap(a: SymMatrix, b: SymMatrix) -> WeylGap:
    """
    Compare ascending spectra of two symmetric matrices.

    Returns:
        WeylGap: gap = max_i |lambda_i(A) - lambda_i(B)|, bound = ||A - B||_2.
    """
    _check_same_dim(a, b)
    gap = float(np.max(np.abs(eigenvalues(a) - eigenvalues(b))))
    return WeylGap(gap=gap, bound=hs_norm(a - b))


def is_negative_definite(a: SymMatrix, tol: float = 1e-8) -> bool:
    """True iff the largest eigenvalue is below -tol."""
    if tol <= 0:
        raise ValueError("tol must be positive.")
    return bool(eigenvalues(a)[-1] < -tol)
