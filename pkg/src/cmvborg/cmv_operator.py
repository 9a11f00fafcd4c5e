"""Finite unitary truncations of the CMV operator ``U = V W``.

Sites ``k_lo..k_hi`` are kept. The segment is cut off from the rest of the
lattice by replacing the two coefficients whose Theta blocks straddle the
ends (``alpha_{k_lo}`` and ``alpha_{k_hi + 1}``) with a unitary boundary
matrix: then ``rho = rho_tilde = 0`` there, the blocks become block diagonal
and the truncated V, W, U stay exactly unitary.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (DimensionMismatch, InvalidRange, NearUnitCircle,
                     NotUnitary, SolveFailure, TooCloseToBoundary)
from .linalg_core import DEFAULT_TOL, is_unitary
from .verblunsky import ContractivityViolated, rho_pair, theta_matrix

__all__ = ['CmvTruncation', 'build', 'build_centered', 'apply',
           'resolvent_solve', 'diagonal_resolvent', 'diagonal_moment',
           'block_vector', 'export_coo', 'read_coo']


@dataclass(frozen=True)
class CmvTruncation:
    m: int
    k_lo: int
    k_hi: int
    boundary: np.ndarray = field(repr=False)
    V: sp.csr_matrix = field(repr=False)
    W: sp.csr_matrix = field(repr=False)
    U: sp.csr_matrix = field(repr=False)
    seq: object = field(repr=False, default=None)
    _band: object = field(repr=False, default=None, compare=False)

    @property
    def n_sites(self):
        return self.k_hi - self.k_lo + 1

    @property
    def dim(self):
        return self.n_sites * self.m

    def block(self, k):
        """Scalar index slice of site ``k``."""
        if not self.k_lo <= k <= self.k_hi:
            raise IndexError('site %d outside [%d, %d]' % (k, self.k_lo, self.k_hi))
        i = (k - self.k_lo) * self.m
        return slice(i, i + self.m)

    def entry(self, k, kp, which='U'):
        """The ``(k, kp)`` block of V, W or U as a dense ``(m, m)`` array."""
        A = getattr(self, which)
        return A[self.block(k), self.block(kp)].toarray()

    def dense(self, which='U'):
        return getattr(self, which).toarray()

    def bandwidth(self):
        """Lower and upper scalar bandwidth of U."""
        coo = self.U.tocoo()
        nz = np.abs(coo.data) > 0
        d = coo.col[nz] - coo.row[nz]
        return int(max(0, -d.min(initial=0))), int(max(0, d.max(initial=0)))

    def banded(self):
        """U in LAPACK band storage as used by ``scipy.linalg.solve_banded``."""
        if self._band is None:
            lower, upper = self.bandwidth()
            coo = self.U.tocoo()
            ab = np.zeros((lower + upper + 1, self.dim), dtype=complex)
            ab[upper + coo.row - coo.col, coo.col] = coo.data
            object.__setattr__(self, '_band', (lower, upper, ab))
        return self._band


def _blocks_to_sparse(blocks, n_sites, m):
    rows, cols, vals = [], [], []
    for (i, j), b in blocks.items():
        r, c = np.meshgrid(np.arange(m) + i * m, np.arange(m) + j * m,
                           indexing='ij')
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(b.ravel())
    n = n_sites * m
    if not rows:
        return sp.csr_matrix((n, n), dtype=complex)
    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.eliminate_zeros()
    return A


def build(seq, k_lo, k_hi, boundary=None, tol=DEFAULT_TOL):
    """Truncate the CMV operator of ``seq`` to sites ``k_lo..k_hi``.

    The number of sites must be even; an odd count is snapped by including
    one more site on the right.
    """
    m = seq.m
    if k_hi - k_lo < 4:
        raise InvalidRange('need k_hi - k_lo >= 4')
    if (k_hi - k_lo + 1) % 2:
        k_hi += 1
    B = np.eye(m, dtype=complex) if boundary is None else np.asarray(boundary, dtype=complex)
    if not is_unitary(B, tol.unitary):
        raise NotUnitary('boundary matrix must be unitary')
    n_sites = k_hi - k_lo + 1
    alphas = seq.alphas(k_lo + 1, k_hi)
    try:
        r, rt = rho_pair(alphas, tol)
    except ContractivityViolated as exc:
        bad = int(np.argmax(np.linalg.norm(alphas, 2, axis=(1, 2))))
        raise ContractivityViolated(str(exc), site=k_lo + 1 + bad) from None
    zero = np.zeros((m, m), dtype=complex)
    theta = {}
    for j in range(k_lo, k_hi + 2):
        if j in (k_lo, k_hi + 1):
            theta[j] = theta_matrix(B, zero, zero)
        else:
            i = j - k_lo - 1
            theta[j] = theta_matrix(alphas[i], r[i], rt[i])
    vblocks, wblocks = {}, {}
    for j, T in theta.items():
        target = vblocks if j % 2 == 0 else wblocks
        for bi, s in enumerate((j - 1, j)):
            for bj, t in enumerate((j - 1, j)):
                if k_lo <= s <= k_hi and k_lo <= t <= k_hi:
                    target[(s - k_lo, t - k_lo)] = T[bi * m:(bi + 1) * m,
                                                     bj * m:(bj + 1) * m]
    V = _blocks_to_sparse(vblocks, n_sites, m)
    W = _blocks_to_sparse(wblocks, n_sites, m)
    U = (V @ W).tocsr()
    return CmvTruncation(m, k_lo, k_hi, B, V, W, U, seq)


def build_centered(seq, k0, n_sites, boundary=None, tol=DEFAULT_TOL):
    """Truncation with ``n_sites`` sites and ``k0`` in the middle."""
    n_sites = max(6, int(n_sites) + int(n_sites) % 2)
    k_lo = k0 - n_sites // 2
    return build(seq, k_lo, k_lo + n_sites - 1, boundary, tol)


def block_vector(t, k, cols=None):
    """Coordinate block vector ``Delta_k`` as an ``(dim, m)`` array."""
    X = np.zeros((t.dim, t.m), dtype=complex)
    X[t.block(k)] = np.eye(t.m)
    return X if cols is None else X[:, cols]


def apply(t, which, x):
    """Apply U, U*, V or W (``which`` in {'U', 'U*', 'V', 'W'})."""
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != t.dim:
        raise DimensionMismatch('vector length %d != %d' % (x.shape[0], t.dim))
    if which == 'U*':
        return t.U.conj().T @ x
    if which not in ('U', 'V', 'W'):
        raise ValueError('which must be U, U*, V or W')
    return getattr(t, which) @ x


def _check_z(z):
    if abs(1 - abs(z)) < 1e-6:
        raise NearUnitCircle('|z| = %.9f too close to the unit circle' % abs(z))


def resolvent_solve(t, z, rhs):
    """Solve ``(U - z I) y = rhs`` with a banded LU factorisation."""
    _check_z(z)
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[0] != t.dim:
        raise DimensionMismatch('rhs length %d != %d' % (rhs.shape[0], t.dim))
    if z == 0:
        return t.U.conj().T @ rhs
    lower, upper, ab = t.banded()
    a = ab.copy()
    a[upper] -= z
    try:
        y = sla.solve_banded((lower, upper), a, rhs, overwrite_ab=True,
                             check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(y)):
        raise SolveFailure('non-finite resolvent solution')
    return y


def diagonal_resolvent(t, k0, zs, workers=None):
    """``Delta_k0 (U - z)^{-1} Delta_k0`` for every z, shape ``(len(zs), m, m)``.

    Solves are independent; with ``workers`` they run in a thread pool
    (LAPACK releases the GIL) and are stored by index, so the result does not
    depend on scheduling.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    rhs = block_vector(t, k0)
    sl = t.block(k0)
    out = np.empty((len(zs), t.m, t.m), dtype=complex)

    def one(i):
        out[i] = resolvent_solve(t, zs[i], rhs)[sl]

    if workers and workers > 1 and len(zs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(len(zs))))
    else:
        for i in range(len(zs)):
            one(i)
    return out


def diagonal_moment(t, k0, p):
    """``Delta_k0 (U*)^p Delta_k0`` via ``p`` banded applications.

    This is half of the Taylor coefficient ``M_p`` of ``M_{1,1}``.
    """
    if p < 1:
        raise ValueError('p must be positive')
    if k0 - t.k_lo <= 2 * p or t.k_hi - k0 <= 2 * p:
        raise TooCloseToBoundary('site %d within %d sites of a cut' % (k0, 2 * p))
    Ustar = t.U.conj().T.tocsr()
    x = block_vector(t, k0)
    for _ in range(p):
        x = Ustar @ x
    return x[t.block(k0)]


def export_coo(t, path, which='U'):
    """Write nonzero entries as ``row col re im`` lines (17 significant digits)."""
    coo = getattr(t, which).tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, 'w') as fh:
        fh.write('# %d %d\n' % (t.dim, t.dim))
        for i in order:
            v = coo.data[i]
            fh.write('%d %d %.17g %.17g\n' % (coo.row[i], coo.col[i], v.real, v.imag))


def read_coo(path):
    with open(path) as fh:
        header = fh.readline().split()
        n = int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, n), dtype=complex)
    return sp.coo_matrix((data[:, 2] + 1j * data[:, 3],
                          (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=(n, n)).tocsr()
