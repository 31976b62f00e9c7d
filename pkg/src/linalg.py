"""
SleepFS Linear Algebra Module
Dense covariance, Householder least squares and the Jacobi symmetric eigensolver
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientRows, NoConvergence, NotSymmetric, RankDeficient, ShapeError

SYMMETRY_TOL = 1e-9
JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100
RANK_TOL = 1e-12


@dataclass(frozen=True)
class EigenResult:
    """
    Eigenpairs of a symmetric matrix

    Attributes:
        eigenvalues: Sorted non-increasing
        eigenvectors: Column j pairs with eigenvalues[j]; columns orthonormal
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """
    Coerce values into a finite 2-D float64 array

    Args:
        values: Anything np.asarray accepts
        name: Used in error messages

    Returns:
        np.ndarray: rows >= 1, cols >= 1

    Raises:
        ShapeError: If the input is not a non-empty finite 2-D array
    """
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {matrix.ndim}-D")
    if matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and column, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ShapeError(f"{name} contains non-finite values")
    return matrix


def as_vector(values, length: int = None, name: str = "vector") -> np.ndarray:
    """Coerce values into a finite 1-D float64 array, optionally of a fixed length"""
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got {vector.ndim}-D")
    if length is not None and vector.shape[0] != length:
        raise ShapeError(f"{name} has length {vector.shape[0]}, expected {length}")
    if not np.all(np.isfinite(vector)):
        raise ShapeError(f"{name} contains non-finite values")
    return vector


def covariance(X) -> np.ndarray:
    """
    Population covariance matrix, (1/n)(X - mu)^T (X - mu)

    Args:
        X: n x d matrix with n >= 2

    Returns:
        np.ndarray: Symmetric d x d matrix

    Raises:
        InsufficientRows: If X has fewer than 2 rows
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    if n < 2:
        raise InsufficientRows(f"covariance needs at least 2 rows, got {n}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / n
    return (cov + cov.T) / 2.0


def _off_diagonal_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def eig_symmetric(A) -> EigenResult:
    """
    Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations

    Sweeps every (p, q) pair above the diagonal, zeroing a_pq with one
    rotation, until the off-diagonal Frobenius norm drops below 1e-10.

    Args:
        A: Square matrix, symmetric within 1e-9

    Returns:
        EigenResult: Eigenvalues descending (ties keep original order),
        eigenvectors with their largest-magnitude entry non-negative

    Raises:
        ShapeError: If A is not square
        NotSymmetric: If |A - A^T| exceeds 1e-9 anywhere
        NoConvergence: If 100 sweeps are not enough
    """
    A = as_matrix(A, "A")
    d = A.shape[0]
    if A.shape[1] != d:
        raise ShapeError(f"eigendecomposition needs a square matrix, got {A.shape}")
    asymmetry = float(np.max(np.abs(A - A.T)))
    if asymmetry > SYMMETRY_TOL:
        raise NotSymmetric(f"matrix is not symmetric (max |A - A^T| = {asymmetry:.3e})")

    work = (A + A.T) / 2.0
    vectors = np.eye(d)
    threshold = JACOBI_TOL

    converged = _off_diagonal_norm(work) < threshold
    sweeps = 0
    while not converged:
        if sweeps >= JACOBI_MAX_SWEEPS:
            raise NoConvergence(
                f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps", iterations=sweeps
            )
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                tau = (work[q, q] - work[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rotation = np.array([[c, s], [-s, c]])
                cols = [p, q]
                work[:, cols] = work[:, cols] @ rotation
                work[cols, :] = rotation.T @ work[cols, :]
                work[p, q] = work[q, p] = 0.0
                vectors[:, cols] = vectors[:, cols] @ rotation
        sweeps += 1
        converged = _off_diagonal_norm(work) < threshold

    eigenvalues = np.diag(work).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]

    # largest-magnitude entry of every eigenvector is non-negative
    for j in range(d):
        pivot = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]

    return EigenResult(eigenvalues=eigenvalues, eigenvectors=vectors)


def solve_upper_triangular(R: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back substitution for R x = b with R upper triangular and non-singular"""
    n = R.shape[0]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - R[i, i + 1:] @ x[i + 1:]) / R[i, i]
    return x


def lstsq(X, y) -> np.ndarray:
    """
    Least-squares solution of X beta = y via Householder QR

    Args:
        X: n x d matrix with n >= d
        y: Vector of length n

    Returns:
        np.ndarray: beta minimising ||y - X beta||^2

    Raises:
        ShapeError: If n < d or y does not have n entries
        RankDeficient: If some |R_jj| < 1e-12 * max|R|
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    y = as_vector(y, n, "y")
    if n < d:
        raise ShapeError(f"least squares needs rows >= cols, got {n} x {d}")

    R = X.copy()
    qty = y.copy()
    for j in range(d):
        column = R[j:, j]
        norm = np.linalg.norm(column)
        if norm == 0.0:
            continue
        alpha = -norm if column[0] >= 0 else norm
        v = column.copy()
        v[0] -= alpha
        v_norm = np.linalg.norm(v)
        if v_norm == 0.0:
            continue
        v /= v_norm
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        qty[j:] -= 2.0 * v * (v @ qty[j:])

    R = np.triu(R[:d, :])
    scale = float(np.max(np.abs(R))) if R.size else 0.0
    diagonal = np.abs(np.diag(R))
    if scale == 0.0 or np.any(diagonal < RANK_TOL * scale):
        raise RankDeficient(
            f"design matrix is rank deficient (min |R_jj| = {diagonal.min():.3e}, max |R| = {scale:.3e})"
        )
    return solve_upper_triangular(R, qty[:d])
