"""Exact diagonalization in a determinant basis (FCI, CASCI, truncated CI)."""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..errors import ConvergenceError, InputError, PreconditionError
from ..integrals import SpinOrbitalBasis
from . import kernels
from .determinants import Determinant, enumerate_determinants
from .state import CIVector, reference_from_occupation

log = logging.getLogger(__name__)

DENSE_LIMIT = 5000


def hamiltonian_matrix(basis: SpinOrbitalBasis, dets: list[Determinant], sparse: bool | None = None):
    """Hamiltonian over ``dets`` including the core energy."""
    n = len(dets)
    bits = np.array([d.bits(basis.n_spatial) for d in dets], dtype=np.uint64)
    if sparse is None:
        sparse = n > DENSE_LIMIT
    if not sparse:
        return kernels.hamiltonian_dense(bits, basis.h, basis.g) + basis.e_core * np.eye(n)
    rows, cols, vals = kernels.hamiltonian_upper(bits, basis.h, basis.g)
    upper = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    H = upper + sp.triu(upper, k=1).T
    return (H + basis.e_core * sp.identity(n, format="csr")).tocsr()


def davidson(H, n_roots: int = 1, tol: float = 1e-10, max_iter: int = 200, max_space: int = 60, guess=None):
    """Lowest eigenpairs of a symmetric (sparse) matrix with a diagonal preconditioner.

    Converged when every root's residual 2-norm is at most ``tol``.
    """
    n = H.shape[0]
    diag = H.diagonal()
    if guess is None:
        guess = np.zeros((n, n_roots))
        for k, idx in enumerate(np.argsort(diag)[:n_roots]):
            guess[idx, k] = 1.0
    V, _ = np.linalg.qr(guess)
    AV = H @ V
    for it in range(max_iter):
        S = V.T @ AV
        theta, s = np.linalg.eigh(0.5 * (S + S.T))
        theta, s = theta[:n_roots], s[:, :n_roots]
        X = V @ s
        R = AV @ s - X * theta
        rnorm = np.linalg.norm(R, axis=0)
        log.debug("davidson it=%d E=%s |r|=%s", it, theta, rnorm)
        if np.all(rnorm <= tol):
            return theta, X, it + 1
        new = []
        for k in np.flatnonzero(rnorm > tol):
            denom = theta[k] - diag
            denom[np.abs(denom) < 1e-8] = 1e-8
            new.append(R[:, k] / denom)
        if V.shape[1] + len(new) > max_space:
            V, AV = X.copy(), AV @ s
        T = np.array(new).T
        for _ in range(2):
            T -= V @ (V.T @ T)
        T, _ = np.linalg.qr(T)
        keep = np.linalg.norm(T, axis=0) > 1e-12
        T = T[:, keep]
        if T.shape[1] == 0:
            return theta, X, it + 1
        V = np.hstack([V, T])
        AV = np.hstack([AV, H @ T])
    raise ConvergenceError(f"Davidson did not converge in {max_iter} iterations (max residual {rnorm.max():.3e})")


def _fix_phase(c: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(c)))
    return -c if c[k] < 0 else c


def solve_ci(basis: SpinOrbitalBasis, dets: list[Determinant], n_roots: int = 1,
             tol: float = 1e-10, max_iter: int = 200) -> tuple[np.ndarray, list[CIVector]]:
    """Lowest ``n_roots`` eigenpairs of the Hamiltonian projected onto ``dets``.

    Dense diagonalization is used up to ``DENSE_LIMIT`` determinants, Davidson
    on a sparse matrix above.  Each vector's largest coefficient is positive.
    """
    if not dets:
        raise PreconditionError("empty determinant list")
    if n_roots < 1 or n_roots > len(dets):
        raise InputError(f"n_roots must lie in [1, {len(dets)}]")
    width = max(max(d.alpha_mask, d.beta_mask) for d in dets).bit_length()
    if width > basis.n_spatial:
        raise PreconditionError("determinants exceed the orbital space of the basis")
    n = len(dets)
    if n <= DENSE_LIMIT:
        H = hamiltonian_matrix(basis, dets, sparse=False)
        w, v = scipy.linalg.eigh(H, subset_by_index=(0, n_roots - 1))
    else:
        H = hamiltonian_matrix(basis, dets, sparse=True)
        w, v, nit = davidson(H, n_roots, tol=tol, max_iter=max_iter)
        log.info("Davidson converged in %d iterations", nit)
    ref = reference_from_occupation(basis.reference_occupation, basis.n_spatial)
    states = [CIVector(basis.n_spatial, dets, _fix_phase(v[:, k].copy()), ref) for k in range(n_roots)]
    return np.asarray(w), states


def fci(basis: SpinOrbitalBasis, n_roots: int = 1, max_rank: int | None = None):
    """Convenience wrapper: (truncated) CI over all determinants of the basis."""
    ref = reference_from_occupation(basis.reference_occupation, basis.n_spatial)
    dets = enumerate_determinants(basis.n_spatial, basis.n_alpha, basis.n_beta, max_rank=max_rank,
                                  reference=ref if max_rank is not None else None)
    return solve_ci(basis, dets, n_roots)
