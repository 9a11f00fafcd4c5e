"""Half-lattice Weyl-Titchmarsh machinery.

Schur functions ``Phi_+`` and ``Phi_-^{-1}`` are obtained by iterating the
Riccati-type recursions from a far-away seed towards the reference site.
The iteration is a contraction for ``|z| < 1``; results are certified by
comparing two depths and, optionally, two seeds.

Functions accept a scalar ``z`` or an array of points and vectorise over it.
"""

from dataclasses import dataclass

import numpy as np

from .cmv_operator import build
from .errors import NoConvergence, SingularPivot
from .herglotz import CaratheodoryEval, inverse_cayley_values
from .linalg_core import DEFAULT_TOL, adjoint, operator_norm
from .verblunsky import rho_pair

__all__ = ['LaurentSolutionQuad', 'SchurPair', 'generate_quad',
           'quad_residual', 'riccati_step_down', 'riccati_step_up_minus',
           'riccati_residual_plus', 'riccati_residual_minus', 'default_depth',
           'schur_plus', 'schur_minus', 'schur_pair', 'm_functions',
           'm11_from_pair', 'm11', 'm11_eval', 'weyl_solution',
           'resolvent_formula_check', 'ResolventCheck', 'riccati_chain',
           'write_chain_csv']

MAX_DEPTH = 1 << 17


def _pts(z):
    z = np.asarray(z, dtype=complex)
    return z.reshape(-1), z.shape


def _solve(A, B):
    """``inv(A) @ B`` with a singularity check."""
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularPivot(str(exc)) from exc
    if not np.all(np.isfinite(X)):
        raise SingularPivot('singular pivot')
    return X


def _solve_right(A, B):
    """``A @ inv(B)``."""
    return adjoint(_solve(adjoint(B), adjoint(A)))


# -- Laurent polynomial solutions ---------------------------------------------

@dataclass(frozen=True)
class LaurentSolutionQuad:
    """P_+, Q_+, R_+, S_+ on ``k_lo..k_hi`` for one spectral parameter z."""
    z: complex
    k0: int
    k_lo: int
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray

    @property
    def k_hi(self):
        return self.k_lo + len(self.P) - 1

    def at(self, k):
        i = k - self.k_lo
        return self.P[i], self.Q[i], self.R[i], self.S[i]


def _initial(z, k0, m):
    I = np.eye(m, dtype=complex)
    if k0 % 2:
        return z * I, z * I, I, -I
    return I, -I, I, I


def generate_quad(seq, z, k0, k_lo, k_hi, tol=DEFAULT_TOL):
    """Solve ``W P = z R``, ``V R = P`` (and the same for Q, S) site by site.

    One step couples sites ``k`` and ``k + 1`` through ``Theta_{k+1}``,
    which sits in W for even k and in V for odd k; the step is inverted with
    ``Theta^{-1} = Theta^*`` when moving left.
    """
    if z == 0:
        raise ValueError('z must be nonzero')
    if not k_lo <= k0 <= k_hi:
        raise ValueError('range must cover k0')
    m = seq.m
    alphas = seq.alphas(k_lo + 1, k_hi)
    r, rt = rho_pair(alphas, tol)
    n = k_hi - k_lo + 1
    P, Q, R, S = (np.empty((n, m, m), dtype=complex) for _ in range(4))
    p0, q0, r0, s0 = _initial(z, k0, m)
    i0 = k0 - k_lo
    P[i0], Q[i0], R[i0], S[i0] = p0, q0, r0, s0

    def fwd(k, X, Y):
        i = k + 1 - (k_lo + 1)
        al, rh, rht = alphas[i], r[i], rt[i]
        if k % 2 == 0:
            X1 = np.linalg.solve(rht, z * Y + al @ X)
            Y1 = (rh @ X + adjoint(al) @ X1) / z
        else:
            Y1 = np.linalg.solve(rht, X + al @ Y)
            X1 = rh @ Y + adjoint(al) @ Y1
        return X1, Y1

    def bwd(k, X1, Y1):
        i = k + 1 - (k_lo + 1)
        al, rh, rht = alphas[i], r[i], rt[i]
        if k % 2 == 0:
            Y = np.linalg.solve(rht, X1 / z - al @ Y1)
            X = z * (-adjoint(al) @ Y + rh @ Y1)
        else:
            X = np.linalg.solve(rht, Y1 - al @ X1)
            Y = -adjoint(al) @ X + rh @ X1
        return X, Y

    for k in range(k0, k_hi):
        i = k - k_lo
        P[i + 1], R[i + 1] = fwd(k, P[i], R[i])
        Q[i + 1], S[i + 1] = fwd(k, Q[i], S[i])
    for k in range(k0 - 1, k_lo - 1, -1):
        i = k - k_lo
        P[i], R[i] = bwd(k, P[i + 1], R[i + 1])
        Q[i], S[i] = bwd(k, Q[i + 1], S[i + 1])
    return LaurentSolutionQuad(complex(z), k0, k_lo, P, Q, R, S)


def quad_residual(seq, quad):
    """Largest residual of ``W P - z R``, ``V R - P``, ``W Q - z S``, ``V S - Q``.

    Evaluated with the banded V, W of a truncation covering the quadruple's
    range, on sites at least two away from the ends of that range.
    """
    lo, hi = quad.k_lo, quad.k_hi
    t = build(seq, lo - 4, hi + 4 + (hi - lo + 1) % 2)
    m = seq.m

    def col(A):
        X = np.zeros((t.dim, m), dtype=complex)
        for k in range(lo, hi + 1):
            X[t.block(k)] = A[k - lo]
        return X

    P, Q, R, S = (col(A) for A in (quad.P, quad.Q, quad.R, quad.S))
    z = quad.z
    worst = 0.0
    for lhs, rhs in ((t.W @ P, z * R), (t.V @ R, P), (t.W @ Q, z * S), (t.V @ S, Q)):
        for k in range(lo + 2, hi - 1):
            sl = t.block(k)
            worst = max(worst, np.linalg.norm(lhs[sl] - rhs[sl], 2))
    return worst


# -- Riccati recursions --------------------------------------------------------

def _coeffs(alphas, tol):
    """Per-site matrices used by both Riccati recursions."""
    r, rt = rho_pair(alphas, tol)
    ri = np.linalg.inv(r)
    rti = np.linalg.inv(rt)
    return {'rti_a': rti @ alphas, 'ri': ri, 'rti': rti,
            'ri_as': ri @ adjoint(alphas)}


def _down(P, c, z):
    A = P @ c['rti_a'] - c['ri']
    B = z[:, None, None] * (c['ri_as'] - P @ c['rti'])
    return _solve(A, B)


def _up(X, c, z):
    zz = z[:, None, None]
    num = zz * (c['rti'] @ X) + c['rti_a']
    den = zz * (c['ri_as'] @ X) + c['ri']
    return _solve_right(num, den)


def riccati_step_down(phi_plus, alpha, z, tol=DEFAULT_TOL):
    """``Phi_+(z, k-1)`` from ``Phi_+(z, k)`` and ``alpha_k``.

    Solves ``Phi_+(k) rt^-1 a Phi_+(k-1) + z Phi_+(k) rt^-1 - r^-1 Phi_+(k-1)
    = z r^-1 a^*`` for the unknown ``Phi_+(k-1)``.
    """
    zf, shape = _pts(z)
    P = np.broadcast_to(phi_plus, zf.shape + np.shape(alpha)[-2:]).astype(complex)
    out = _down(P, _coeffs(np.asarray(alpha, dtype=complex), tol), zf)
    return out.reshape(shape + out.shape[-2:])


def riccati_step_up_minus(phi_minus_inv, alpha, z, tol=DEFAULT_TOL):
    """``Phi_-(z, k)^{-1}`` from ``Phi_-(z, k-1)^{-1}`` and ``alpha_k``."""
    zf, shape = _pts(z)
    X = np.broadcast_to(phi_minus_inv, zf.shape + np.shape(alpha)[-2:]).astype(complex)
    out = _up(X, _coeffs(np.asarray(alpha, dtype=complex), tol), zf)
    return out.reshape(shape + out.shape[-2:])


def riccati_residual_plus(phi_k, phi_km1, alpha, z, tol=DEFAULT_TOL):
    c = _coeffs(np.asarray(alpha, dtype=complex), tol)
    z = np.asarray(z, dtype=complex)[..., None, None]
    res = (phi_k @ c['rti_a'] @ phi_km1 + z * phi_k @ c['rti']
           - c['ri'] @ phi_km1 - z * c['ri_as'])
    return np.max(np.atleast_1d(operator_norm(res)))


def riccati_residual_minus(phi_inv_k, phi_inv_km1, alpha, z, tol=DEFAULT_TOL):
    c = _coeffs(np.asarray(alpha, dtype=complex), tol)
    z = np.asarray(z, dtype=complex)[..., None, None]
    res = (z * phi_inv_k @ c['ri_as'] @ phi_inv_km1 + phi_inv_k @ c['ri']
           - z * c['rti'] @ phi_inv_km1 - c['rti_a'])
    return np.max(np.atleast_1d(operator_norm(res)))


def default_depth(z):
    """Iteration depth for the points ``z``: about ``36 / (1 - |z|)`` sites."""
    rmax = float(np.max(np.abs(z), initial=0.0))
    if rmax >= 1:
        raise ValueError('Schur iteration needs |z| < 1')
    return int(min(MAX_DEPTH, max(64, np.ceil(36.0 / (1.0 - rmax)))))


_CHUNK = 4096


def _iterate_plus(seq, zf, k0, depth, seed, tol):
    m = seq.m
    P = np.broadcast_to(seed, (len(zf), m, m)).astype(complex)
    hi = k0 + depth
    while hi > k0:
        lo = max(k0 + 1, hi - _CHUNK + 1)
        c = _coeffs(seq.alphas(lo, hi), tol)
        for i in range(hi - lo, -1, -1):
            P = _down(P, {key: v[i] for key, v in c.items()}, zf)
        hi = lo - 1
    return P


def _iterate_minus(seq, zf, k0, depth, seed, tol):
    m = seq.m
    X = np.broadcast_to(seed, (len(zf), m, m)).astype(complex)
    lo = k0 - depth + 1
    while lo <= k0:
        hi = min(k0, lo + _CHUNK - 1)
        c = _coeffs(seq.alphas(lo, hi), tol)
        for i in range(hi - lo + 1):
            X = _up(X, {key: v[i] for key, v in c.items()}, zf)
        lo = hi + 1
    return X


def _certified(iterate, seq, z, k0, depth, tol_conv, seed, certify, tol):
    zf, shape = _pts(z)
    if depth is None:
        depth = default_depth(zf)
    m = seq.m
    seed = np.zeros((m, m), dtype=complex) if seed is None else seed
    out = iterate(seq, zf, k0, depth, seed, tol)
    resid = 0.0
    if certify:
        deeper = iterate(seq, zf, k0, 2 * depth, seed, tol)
        resid = float(np.max(np.atleast_1d(operator_norm(deeper - out)), initial=0.0))
        if resid > tol_conv:
            raise NoConvergence('depth %d vs %d differ by %.2e' % (depth, 2 * depth, resid),
                                resid, depth)
        out = deeper
    return out.reshape(shape + (m, m)), depth, resid


def schur_plus(seq, z, k0, depth=None, tol_conv=1e-10, seed=None, certify=True,
               tol=DEFAULT_TOL):
    """``Phi_+(z, k0)``: Riccati recursion run downward from site ``k0 + depth``."""
    return _certified(_iterate_plus, seq, z, k0, depth, tol_conv, seed, certify, tol)[0]


def schur_minus(seq, z, k0, depth=None, tol_conv=1e-10, seed=None, certify=True,
                tol=DEFAULT_TOL):
    """``Phi_-(z, k0)^{-1}``: Riccati recursion run upward from ``k0 - depth``."""
    return _certified(_iterate_minus, seq, z, k0, depth, tol_conv, seed, certify, tol)[0]


@dataclass(frozen=True)
class SchurPair:
    z: np.ndarray
    k: int
    phi_plus: np.ndarray
    phi_minus_inv: np.ndarray
    depth: int
    residual: float


def schur_pair(seq, z, k0, depth=None, tol_conv=1e-10, certify=True,
               tol=DEFAULT_TOL):
    p, d1, r1 = _certified(_iterate_plus, seq, z, k0, depth, tol_conv, None, certify, tol)
    q, d2, r2 = _certified(_iterate_minus, seq, z, k0, depth, tol_conv, None, certify, tol)
    return SchurPair(np.asarray(z, dtype=complex), k0, p, q, max(d1, d2), max(r1, r2))


def riccati_chain(seq, z, k0, depth, side='plus', tol=DEFAULT_TOL):
    """All iterates of one recursion for a scalar z, for diagnostics.

    Returns ``(sites, values, residuals)``: for ``side='plus'`` the values
    are ``Phi_+(z, k)`` for ``k = k0 + depth .. k0`` with the residual of the
    equation linking ``k`` and ``k-1``.
    """
    zf = np.array([z], dtype=complex)
    m = seq.m
    vals, res, sites = [], [], []
    if side == 'plus':
        P = np.zeros((1, m, m), dtype=complex)
        sites.append(k0 + depth)
        vals.append(P[0])
        res.append(0.0)
        for k in range(k0 + depth, k0, -1):
            a = seq.alpha(k)
            Pn = _down(P, _coeffs(a, tol), zf)
            res.append(riccati_residual_plus(P[0], Pn[0], a, z, tol))
            P = Pn
            sites.append(k - 1)
            vals.append(P[0])
    else:
        X = np.zeros((1, m, m), dtype=complex)
        sites.append(k0 - depth)
        vals.append(X[0])
        res.append(0.0)
        for k in range(k0 - depth + 1, k0 + 1):
            a = seq.alpha(k)
            Xn = _up(X, _coeffs(a, tol), zf)
            res.append(riccati_residual_minus(Xn[0], X[0], a, z, tol))
            X = Xn
            sites.append(k)
            vals.append(X[0])
    return np.array(sites), np.array(vals), np.array(res)


def write_chain_csv(path, sites, values, residuals):
    """Dump a Riccati chain as ``k,residual,norm`` rows."""
    norms = np.atleast_1d(operator_norm(values))
    with open(path, 'w') as fh:
        fh.write('k,residual,norm\n')
        for k, r, n in zip(sites, residuals, norms):
            fh.write('%d,%r,%r\n' % (k, float(r), float(n)))


# -- Weyl-Titchmarsh functions -------------------------------------------------

def m_functions(seq, z, k0, pair=None, **kw):
    """``(M_+, M_-)`` at ``z`` from the Schur pair."""
    if pair is None:
        pair = schur_pair(seq, z, k0, **kw)
    Mp = inverse_cayley_values(pair.phi_plus)
    Mm = inverse_cayley_values(pair.phi_minus_inv, inverse_form=True)
    return Mp, Mm


def m11_from_pair(pair, k0=None):
    """``M_{1,1}(z, k0)`` via ``Phi_{1,1}`` and the Cayley transform."""
    k0 = pair.k if k0 is None else k0
    if k0 % 2:
        phi11 = pair.phi_minus_inv @ pair.phi_plus
    else:
        phi11 = pair.phi_plus @ pair.phi_minus_inv
    return inverse_cayley_values(phi11)


def m11(seq, z, k0, **kw):
    return m11_from_pair(schur_pair(seq, z, k0, **kw), k0)


def m11_eval(seq, k0, **kw):
    """``M_{1,1}(., k0)`` as a Caratheodory evaluator backed by the Schur pair."""
    return CaratheodoryEval(lambda z: m11(seq, z, k0, **kw), seq.m,
                            'schur-pair(k0=%d)' % k0)


def weyl_solution(quad, M):
    """``U(k) = Q_+(k) + P_+(k) M`` over the quadruple's range."""
    return quad.Q + quad.P @ M


@dataclass(frozen=True)
class ResolventCheck:
    k: int
    kp: int
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def deviation(self):
        return float(np.linalg.norm(self.lhs - self.rhs, 2))


def resolvent_formula_check(seq, z, pairs, k0, padding=120, tol=DEFAULT_TOL):
    """Compare resolvent blocks with their Weyl-solution expression.

    ``pairs`` is a list of ``(k, k')``. The left side comes from a dense
    solve on a truncation extending ``padding`` sites past the requested
    sites; the right side is
    ``U_-(z,k) W^{-1} U_+(1/conj z,k')^* / (2z)`` for ``k < k'`` or
    ``k = k'`` odd, and ``U_+(z,k) W^{-1} U_-(1/conj z,k')^* / (2z)``
    otherwise, with ``M_pm(1/conj z) = -M_pm(z)^*``.
    """
    if not 0 < abs(z) < 1:
        raise ValueError('need 0 < |z| < 1')
    ks = [k for pr in pairs for k in pr] + [k0]
    lo, hi = min(ks), max(ks)
    t = build(seq, lo - padding, hi + padding, tol=tol)
    A = t.dense() - z * np.eye(t.dim)
    cols = np.concatenate([np.arange(t.block(kp).start, t.block(kp).stop)
                           for kp in sorted({kp for _, kp in pairs})])
    E = np.zeros((t.dim, len(cols)), dtype=complex)
    E[cols, np.arange(len(cols))] = 1
    G = np.linalg.solve(A, E)
    colpos = {kp: i for i, kp in enumerate(sorted({kp for _, kp in pairs}))}

    Mp, Mm = m_functions(seq, z, k0, tol=tol)
    Wr = Mp - Mm
    try:
        Winv = np.linalg.inv(Wr)
    except np.linalg.LinAlgError as exc:
        raise SingularPivot('Wronskian singular') from exc
    zr = 1 / np.conj(z)
    qz = generate_quad(seq, z, k0, lo, hi, tol)
    qr = generate_quad(seq, zr, k0, lo, hi, tol)
    Up_z = weyl_solution(qz, Mp)
    Um_z = weyl_solution(qz, Mm)
    Up_r = weyl_solution(qr, -adjoint(Mp))
    Um_r = weyl_solution(qr, -adjoint(Mm))
    m = seq.m
    out = []
    for k, kp in pairs:
        i, ip = k - lo, kp - lo
        if k < kp or (k == kp and k % 2):
            rhs = Um_z[i] @ Winv @ adjoint(Up_r[ip]) / (2 * z)
        else:
            rhs = Up_z[i] @ Winv @ adjoint(Um_r[ip]) / (2 * z)
        c = colpos[kp] * m
        lhs = G[t.block(k), c:c + m]
        out.append(ResolventCheck(k, kp, lhs, rhs))
    return out
