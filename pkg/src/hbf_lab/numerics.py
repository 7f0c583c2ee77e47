"""Dense complex linear-algebra kernels.

Every routine here is a pure function of its arguments. Matrices are plain
``numpy.ndarray`` objects; inverses are never formed explicitly, all of
them go through Cholesky solves.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import HbfError, NotPositiveDefiniteError, ShapeError

_HERMITIAN_RTOL = 1e-10
_NORM_FLOOR = 1e-12


class GevdResult(NamedTuple):
    value: float
    vector: np.ndarray


def _as_square(name, A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {A.shape}")
    return A


def _check_hermitian(name, A):
    scale = max(np.linalg.norm(A), _NORM_FLOOR)
    if np.linalg.norm(A - A.conj().T) > _HERMITIAN_RTOL * scale:
        raise HbfError(f"{name} is not Hermitian", code="not-hermitian")


def _cholesky(A, code):
    try:
        return sla.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc), code=code) from None


def hermitian_eig_max(A, method="eigh", tol=1e-10, max_iter=20000):
    """Largest eigenvalue of a Hermitian matrix and a unit eigenvector.

    Parameters
    ----------
    A : (n, n) complex ndarray
        Hermitian matrix.
    method : {"eigh", "power"}
        ``"eigh"`` uses LAPACK. ``"power"`` runs a shifted power iteration
        (only the top eigenpair is needed, so this is O(n^2) per step); it
        falls back to LAPACK if it has not converged after `max_iter` steps.

    Returns
    -------
    value : float
    vector : (n,) complex ndarray with unit 2-norm
    """
    A = _as_square("A", A)
    n = A.shape[0]
    if method == "eigh":
        w, U = np.linalg.eigh(A)
        return float(w[-1]), U[:, -1]
    if method != "power":
        raise ValueError(f"unknown eigen method {method!r}")

    # Gershgorin lower bound; shifting by it makes the iteration matrix PSD
    # so the dominant eigenvalue is the algebraically largest one.
    radii = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
    shift = max(0.0, -float(np.min(np.diag(A).real - radii)))
    scale = max(np.linalg.norm(A), _NORM_FLOOR)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    for _ in range(max_iter):
        Ax = A @ x
        rho = float(np.vdot(x, Ax).real)
        if np.linalg.norm(Ax - rho * x) <= tol * scale:
            return rho, x
        y = Ax + shift * x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # x lies in the null space of A + shift*I
            break
        x = y / ny
    return hermitian_eig_max(A, method="eigh")


def gevd_max(B, D, method="eigh"):
    """Top generalized eigenpair of a Hermitian / Hermitian-PD pair.

    Solves ``B v = mu D v`` for the largest ``mu`` by reducing through the
    Cholesky factor ``D = L L^H`` to the standard problem on
    ``L^-1 B L^-H``. The returned vector maximizes the Rayleigh quotient
    ``(x^H B x) / (x^H D x)`` and has unit norm. If the top eigenvalue is
    degenerate any vector of the top eigenspace may be returned.

    Raises
    ------
    ShapeError
        `B` and `D` are not square matrices of the same size.
    NotPositiveDefiniteError
        `D` is not positive definite (code ``"indefinite-pair"``).
    """
    B = _as_square("B", B)
    D = _as_square("D", D)
    if B.shape != D.shape:
        raise ShapeError(f"B {B.shape} and D {D.shape} differ")
    _check_hermitian("B", B)
    _check_hermitian("D", D)
    L = _cholesky(D, "indefinite-pair")
    X = sla.solve_triangular(L, B, lower=True, check_finite=False)
    C = sla.solve_triangular(L, X.conj().T, lower=True, check_finite=False)
    C = 0.5 * (C + C.conj().T)
    value, u = hermitian_eig_max(C, method=method)
    v = sla.solve_triangular(L, u, lower=True, trans="C", check_finite=False)
    v = v / np.linalg.norm(v)
    return GevdResult(value, v)


def svd_thin(G):
    """Thin SVD ``G = U diag(S) R^H`` with ``r = min(m, n)`` triplets.

    Singular values come back non-negative and non-increasing.
    """
    G = np.asarray(G)
    if G.ndim != 2:
        raise ShapeError(f"G must be a matrix, got shape {G.shape}")
    U, S, Rh = np.linalg.svd(G, full_matrices=False)
    return U, S, Rh.conj().T


def solve_hpd(A, Y):
    """Solve ``A X = Y`` for Hermitian positive definite `A`.

    `Y` may be a vector or a matrix. Raises
    :class:`~hbf_lab.errors.NotPositiveDefiniteError` (code
    ``"indefinite-matrix"``) if the Cholesky factorization breaks down.
    """
    A = _as_square("A", A)
    Y = np.asarray(Y)
    if Y.shape[0] != A.shape[0]:
        raise ShapeError(f"A is {A.shape} but Y has {Y.shape[0]} rows")
    L = _cholesky(A, "indefinite-matrix")
    return sla.cho_solve((L, True), Y, check_finite=False)
