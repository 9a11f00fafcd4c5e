"""Small dense matrix primitives used throughout the package.

All routines operate on complex ``(m, m)`` arrays; the ones that make sense
elementwise also accept stacks of shape ``(..., m, m)``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (EigenFailure, NotHermitian, NotPSD, NotUnitary,
                     SpectrumNotInRightHalfPlane)

__all__ = ['Tolerances', 'DEFAULT_TOL', 'EigenPairs', 'adjoint', 'eye_like',
           'hermitian_part', 'hermitian_sqrt', 'principal_log',
           'operator_norm', 'is_unitary', 'unitary_eig', 'random_unitary',
           'random_contraction']


@dataclass(frozen=True)
class Tolerances:
    """Every numerical threshold of the package in one place."""
    herm: float = 1e-10
    unitary: float = 1e-10
    alg: float = 1e-12
    eig: float = 1e-9
    psd: float = 1e-10
    mass: float = 1e-3
    # strict contraction margin for Verblunsky coefficients
    contraction: float = 1e-12


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray

    @property
    def angles(self):
        """Eigen-angles in ``[0, 2*pi)``."""
        return np.mod(np.angle(self.values), 2 * np.pi)


def adjoint(A):
    return np.swapaxes(np.conj(A), -1, -2)


def eye_like(A):
    return np.broadcast_to(np.eye(A.shape[-1], dtype=complex), A.shape)


def hermitian_part(A):
    """``Re(A) = (A + A*)/2`` in the operator sense."""
    return 0.5 * (A + adjoint(A))


def hermitian_sqrt(A, tol=DEFAULT_TOL):
    """Unique positive semidefinite square root of a Hermitian PSD matrix.

    Accepts a single matrix or a stack. Eigenvalues in ``[-tol.psd, 0)`` are
    treated as rounding noise and clipped to zero.
    """
    A = np.asarray(A, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - adjoint(A)), initial=0.0) > tol.herm * scale:
        raise NotHermitian('matrix is not Hermitian')
    w, v = np.linalg.eigh(hermitian_part(A))
    if np.min(w, initial=0.0) < -tol.psd * scale:
        raise NotPSD('matrix has eigenvalue %.3e < 0' % np.min(w))
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w[..., None, :]) @ adjoint(v)


def principal_log(A, max_sqrt=64):
    """Principal matrix logarithm for spectra in the open right half-plane.

    Inverse scaling and squaring: take principal square roots until
    ``||X - I|| < 1/4``, sum the Mercator series for ``log(I + (X - I))``
    and scale back by ``2**s``. A stack of matrices is processed one by one.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim > 2:
        out = np.empty_like(A)
        for idx in np.ndindex(A.shape[:-2]):
            out[idx] = principal_log(A[idx], max_sqrt=max_sqrt)
        return out
    ev = np.linalg.eigvals(A)
    if not np.all(ev.real > 0):
        raise SpectrumNotInRightHalfPlane(
            'eigenvalue %r has nonpositive real part' % ev[np.argmin(ev.real)])
    m = A.shape[0]
    ident = np.eye(m)
    X = A
    s = 0
    while np.linalg.norm(X - ident, 2) >= 0.25:
        if s >= max_sqrt:
            raise SpectrumNotInRightHalfPlane('square root iteration stalled')
        X = sla.sqrtm(X)
        s += 1
    E = X - ident
    term = E.copy()
    total = E.copy()
    for k in range(2, 200):
        term = term @ E
        inc = ((-1) ** (k + 1) / k) * term
        total = total + inc
        if np.linalg.norm(inc) <= 1e-18 * max(1.0, np.linalg.norm(total)):
            break
    return (2.0 ** s) * total


def operator_norm(A):
    """Largest singular value; stacks give one norm per matrix."""
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0.0
    return np.linalg.norm(A, ord=2, axis=(-2, -1))


def is_unitary(A, tol=DEFAULT_TOL.unitary):
    A = np.asarray(A, dtype=complex)
    return np.linalg.norm(adjoint(A) @ A - np.eye(A.shape[-1]), 2) < tol


def unitary_eig(U, tol=DEFAULT_TOL):
    """Eigen-decomposition of a unitary matrix.

    Uses the complex Schur form: for a normal matrix the triangular factor is
    diagonal, so the Schur vectors are an orthonormal eigenbasis even inside
    degenerate clusters. Eigenvalues are projected onto the unit circle.
    """
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    if np.linalg.norm(adjoint(U) @ U - np.eye(n), 2) >= tol.unitary:
        raise NotUnitary('matrix is not unitary')
    try:
        T, Z = sla.schur(U, output='complex')
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    lam = np.diag(T).copy()
    if np.any(np.abs(lam) == 0):
        raise EigenFailure('zero eigenvalue in a unitary matrix')
    off = np.linalg.norm(np.triu(T, 1))
    if off > tol.eig:
        raise EigenFailure('Schur factor not diagonal (%.2e)' % off)
    lam = lam / np.abs(lam)
    resid = np.linalg.norm(U @ Z - Z * lam, axis=0)
    if resid.size and np.max(resid) > tol.eig:
        raise EigenFailure('eigen residual %.2e' % np.max(resid))
    return EigenPairs(values=lam, vectors=Z)


def random_unitary(m, rng):
    """Haar-distributed unitary via QR with phase correction."""
    G = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    Q, R = np.linalg.qr(G)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_contraction(m, rng, max_norm=0.9):
    """Matrix with operator norm uniform in ``[0, max_norm)``."""
    G = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return G / operator_norm(G) * (max_norm * rng.uniform())
