"""Moments, trace formulas, phase functions and Borg-type checks.

Most routines return small dataclasses; :func:`to_jsonable` turns any of
them into plain JSON-compatible structures for the CLI reports.
"""

import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from .cmv_operator import build, build_centered, diagonal_moment, diagonal_resolvent
from .errors import InvalidArc
from .herglotz import (CaratheodoryEval, XiProfile, circle_grid, circle_quadrature,
                       default_schedule, exp_herglotz, fourier_coefficient,
                       xi_from_values)
from .linalg_core import DEFAULT_TOL, adjoint, hermitian_part, operator_norm, unitary_eig
from .verblunsky import borg_sequence, conjugate_sequence, rho_pair
from .weyl import m11_from_pair, schur_pair

__all__ = ['ArcSpec', 'TraceReport', 'SpectralDecomposition', 'ReflectionlessReport',
           'moments', 'moment_closed_forms', 'log_coeffs', 'trace_rhs',
           'sites_for_radius', 'm11_truncation_eval', 'xi_of_operator', 'borg_xi',
           'trace_check', 'trace_check_with_xi', 'reflectionless_check',
           'spectrum', 'spectral_measure', 'arc_statistics', 'max_gap',
           'borg_identity_ladder', 'borg_verify', 'equivalence_check',
           'monotonicity_check', 'xi_deviation', 'to_jsonable']

SCHEMA = 1


def _workers():
    return min(4, os.cpu_count() or 1)


# -- arcs ----------------------------------------------------------------------

@dataclass(frozen=True)
class ArcSpec:
    """Closed arc ``[theta0, theta1]`` of the circle, counterclockwise."""
    theta0: float
    theta1: float

    def __post_init__(self):
        if not 0 <= self.theta0 < 2 * np.pi:
            raise InvalidArc('theta0 must lie in [0, 2*pi)')
        if not self.theta0 < self.theta1 <= self.theta0 + 2 * np.pi + 1e-14:
            raise InvalidArc('need theta0 < theta1 <= theta0 + 2*pi')

    @property
    def length(self):
        return self.theta1 - self.theta0

    @property
    def theta_star(self):
        return 0.5 * (self.theta0 + self.theta1) + np.pi

    @property
    def full(self):
        return self.length >= 2 * np.pi - 1e-14

    def offset(self, theta):
        """Counterclockwise distance from theta0, in ``[0, 2*pi)``."""
        return np.mod(np.asarray(theta) - self.theta0, 2 * np.pi)

    def contains(self, theta, widen=0.0):
        """Membership in the arc widened by ``widen`` radians on each side."""
        if self.full:
            return np.ones(np.shape(theta), dtype=bool)
        u = np.mod(np.asarray(theta) - self.theta0 + widen, 2 * np.pi)
        return u <= self.length + 2 * widen

    def jump_distance(self, theta):
        """Circular distance to the nearest of theta0, theta1, theta_*."""
        theta = np.asarray(theta)
        d = [np.abs(np.angle(np.exp(1j * (theta - p))))
             for p in (self.theta0, self.theta1, self.theta_star)]
        return np.min(d, axis=0)

    def interior(self, theta, collar=0.05):
        u = self.offset(theta)
        return (u > collar) & (u < self.length - collar)


# -- moments and log coefficients ------------------------------------------------

def moments(t, k0, J, check=True, tol=1e-12):
    """``M_j = 2 Delta_k0 (U^*)^j Delta_k0`` for ``j = 1..J``.

    With ``check`` the first two are compared against their closed forms in
    the coefficients; a mismatch raises ``AssertionError``.
    """
    Ms = [2 * diagonal_moment(t, k0, j) for j in range(1, J + 1)]
    if check and t.seq is not None and J >= 1:
        c1, c2 = moment_closed_forms(t.seq, k0)
        if np.linalg.norm(Ms[0] - c1, 2) > tol * max(1.0, np.linalg.norm(c1, 2)):
            raise AssertionError('M_1 does not match its closed form')
        if J >= 2 and np.linalg.norm(Ms[1] - c2, 2) > tol * max(1.0, np.linalg.norm(c2, 2)):
            raise AssertionError('M_2 does not match its closed form')
    return Ms


def moment_closed_forms(seq, k0, tol=DEFAULT_TOL):
    """``(M_1, M_2)`` written out in the coefficients around ``k0``."""
    a = {k: seq.alpha(k) for k in range(k0 - 1, k0 + 3)}
    r, rt = rho_pair(np.array([a[k0], a[k0 + 1]]), tol)
    r0, r1 = r
    rt0, rt1 = rt
    H = adjoint
    if k0 % 2:
        c = a[k0] @ H(a[k0 + 1])
        M2 = 2 * (c @ c - a[k0] @ r1 @ H(a[k0 + 2]) @ rt1
                  - rt0 @ a[k0 - 1] @ r0 @ H(a[k0 + 1]))
    else:
        c = H(a[k0 + 1]) @ a[k0]
        M2 = 2 * (c @ c - r1 @ H(a[k0 + 2]) @ rt1 @ a[k0]
                  - H(a[k0 + 1]) @ rt0 @ a[k0 - 1] @ r0)
    return -2 * c, M2


def _series_mul(A, B):
    n = len(A)
    out = np.zeros_like(A)
    for i in range(n):
        for j in range(n - i):
            out[i + j] += A[i] @ B[j]
    return out


def log_coeffs(M_list, J=None):
    """Taylor coefficients ``L_1..L_J`` of ``log(I + sum_j M_j z^j)``.

    Noncommutative composition with the logarithm series: products of the
    ``M_j`` keep their order, so ``L_3`` carries ``-(M_1 M_2 + M_2 M_1)/2``.
    """
    M = np.asarray(M_list, dtype=complex)
    if M.ndim == 1:
        M = M[:, None, None]
    J = len(M) if J is None else J
    if J > len(M):
        raise ValueError('need at least J moments')
    m = M.shape[-1]
    X = np.zeros((J + 1, m, m), dtype=complex)
    X[1:] = M[:J]
    L = np.zeros_like(X)
    P = X.copy()
    for p in range(1, J + 1):
        L += ((-1) ** (p + 1) / p) * P
        P = _series_mul(P, X)
    return list(L[1:])


def trace_rhs(xi, j, piecewise_constant=False):
    """``2i oint Xi(zeta) conj(zeta)^j dmu_0`` on the profile's grid."""
    return 2j * fourier_coefficient(xi.values, j, piecewise_constant)


# -- M_{1,1} and Xi from a truncation ---------------------------------------------

def sites_for_radius(r, factor=20.0, minimum=64):
    """Truncation size for evaluating at radius r: ``factor / (1 - r)`` sites."""
    n = int(np.ceil(factor / (1 - r)))
    return max(minimum, n + n % 2)


def m11_truncation_eval(t, k0, workers=None):
    """``M_{1,1}(z, k0) = I + 2z Delta (U - z)^{-1} Delta`` from a truncation."""
    workers = _workers() if workers is None else workers

    def f(z):
        R = diagonal_resolvent(t, k0, z, workers=workers)
        return np.eye(t.m) + 2 * z[:, None, None] * R

    return CaratheodoryEval(f, t.m, 'truncation(%d..%d, k0=%d)' % (t.k_lo, t.k_hi, k0))


def xi_of_operator(seq, k0, n=4096, r_schedule=None, n_sites=None, boundary=None,
                   workers=None, skip_bad=True):
    """``Xi_{1,1}(., k0)`` sampled on ``n`` cells at the final radius."""
    r_schedule = r_schedule or default_schedule()
    r = r_schedule[-1]
    n_sites = sites_for_radius(r) if n_sites is None else n_sites
    t = build_centered(seq, k0, n_sites, boundary)
    D, xi = exp_herglotz(m11_truncation_eval(t, k0, workers), n, r_schedule, skip_bad)
    return xi


def borg_xi(arc, m, n=4096):
    """Closed-form step profile: 0 on the arc, +pi/2 up to theta_*, -pi/2 after."""
    theta = circle_grid(n)
    vals = np.zeros((n, m, m), dtype=complex)
    if not arc.full:
        u = arc.offset(theta)
        s = arc.theta_star - arc.theta0
        step = np.where(u < arc.length, 0.0, np.where(u < s, np.pi / 2, -np.pi / 2))
        vals[:] = step[:, None, None] * np.eye(m)
    return XiProfile(theta, vals, 1.0)


def xi_deviation(xi, reference, arc, collar=0.05):
    """Largest operator-norm gap between two profiles away from the jumps."""
    keep = arc.jump_distance(xi.theta) >= collar
    if xi.skipped:
        keep[list(xi.skipped)] = False
    if not np.any(keep):
        return 0.0
    return float(np.max(operator_norm(xi.values[keep] - reference.values[keep])))


# -- trace formulas ----------------------------------------------------------------

@dataclass
class TraceReport:
    k0: int
    J: int
    lhs: list
    rhs: list
    deviations: list
    budget: dict = field(default_factory=dict)

    @property
    def max_deviation(self):
        return max(self.deviations) if self.deviations else 0.0


def trace_check_with_xi(seq, k0, J, xi, piecewise_constant=False, n_sites=None):
    """Trace formulas with a given Xi profile (computed or closed form)."""
    n_sites = n_sites or max(64, 4 * J + 16)
    t = build_centered(seq, k0, n_sites)
    L = log_coeffs(moments(t, k0, J), J)
    rhs = [trace_rhs(xi, j, piecewise_constant) for j in range(1, J + 1)]
    dev = [float(np.linalg.norm(a - b, 2)) for a, b in zip(L, rhs)]
    budget = {
        'radial': [float((1 - xi.r ** j) * np.linalg.norm(L[j - 1], 2))
                   for j in range(1, J + 1)],
        'quadrature_n': xi.n,
        'skipped_points': len(xi.skipped),
    }
    return TraceReport(k0, J, L, rhs, dev, budget)


def trace_check(seq, k0, J, n=4096, r_schedule=None, n_sites=None, workers=None):
    """Left side from moments; right side from the computed Xi profile.

    ``budget['radial']`` is the part of the deviation explained by sampling
    at radius r instead of on the circle: the j-th Fourier coefficient of
    the smoothed profile is ``r**j`` times the exact one.
    """
    r_schedule = r_schedule or default_schedule()
    n_sites = sites_for_radius(r_schedule[-1]) if n_sites is None else n_sites
    xi = xi_of_operator(seq, k0, n, r_schedule, n_sites, workers=workers)
    rep = trace_check_with_xi(seq, k0, J, xi)
    rep.budget['n_sites'] = n_sites
    rep.budget['normalization'] = float(np.linalg.norm(circle_quadrature(xi.values), 2))
    return rep


# -- reflectionless battery ------------------------------------------------------------

@dataclass
class ReflectionlessReport:
    arc: ArcSpec
    r: float
    tol: float
    ks: tuple
    n_points: int
    per_k: dict
    passes: dict

    @property
    def ok(self):
        return all(self.passes.values())


def reflectionless_check(seq, arc, n=512, r=1 - 1e-3, tol=0.05, ks=(0, 1), collar=0.05,
                         depth=None):
    """Reflectionless diagnostics on interior arc points at radius r.

    pair:      ``||Phi_+(r zeta)^* - Phi_-(r zeta)^{-1}||``
    real_part: smallest eigenvalue of ``Re M_{1,1}(r zeta)``
    xi:        ``||Xi_{1,1}(zeta)||`` approximated at radius r

    Each is evaluated at every site in ``ks``; the three verdicts are kept
    separate.
    """
    if r > 1 - 1e-3 + 1e-15:
        raise ValueError('reflectionless battery runs at r <= 1 - 1e-3')
    theta = circle_grid(n)
    theta = theta[arc.interior(theta, collar)]
    z = r * np.exp(1j * theta)
    per_k = {}
    for k in ks:
        pair = schur_pair(seq, z, k, depth=depth)
        defect = operator_norm(adjoint(pair.phi_plus) - pair.phi_minus_inv)
        M = m11_from_pair(pair, k)
        re_min = np.linalg.eigvalsh(hermitian_part(M))[:, 0]
        xi = operator_norm(xi_from_values(M, theta, r, skip_bad=False).values)
        per_k[int(k)] = {
            'pair_max': float(np.max(defect, initial=0.0)),
            'real_part_min': float(np.min(re_min, initial=np.inf)),
            'xi_max': float(np.max(xi, initial=0.0)),
            'xi_worst_theta': float(theta[np.argmax(xi)]) if len(xi) else None,
            'depth': pair.depth,
        }
    passes = {
        'pair': all(d['pair_max'] < tol for d in per_k.values()),
        'real_part': all(d['real_part_min'] > -tol for d in per_k.values()),
        'xi': all(d['xi_max'] < tol for d in per_k.values()),
    }
    return ReflectionlessReport(arc, r, tol, tuple(int(k) for k in ks), len(theta),
                                per_k, passes)


# -- spectra -------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralDecomposition:
    angles: np.ndarray
    weights: np.ndarray
    k0: int

    def moment(self, p):
        """``sum_j conj(lambda_j)^p Omega_j``."""
        return np.tensordot(np.exp(-1j * p * self.angles), self.weights, axes=(0, 0))


def spectrum(t, tol=DEFAULT_TOL):
    """Sorted eigen-angles in ``[0, 2*pi)`` of a truncation."""
    return np.sort(unitary_eig(t.dense(), tol).angles)


def spectral_measure(t, k0, tol=DEFAULT_TOL):
    """Atoms of ``d Omega_{1,1}(., k0)`` for the truncated operator."""
    ep = unitary_eig(t.dense(), tol)
    ang = ep.angles
    order = np.argsort(ang, kind='stable')
    B = ep.vectors[t.block(k0)][:, order].T
    weights = B[:, :, None] * B.conj()[:, None, :]
    return SpectralDecomposition(ang[order], weights, k0)


def max_gap(angles):
    """Largest gap between circularly adjacent angles."""
    a = np.sort(np.mod(angles, 2 * np.pi))
    if len(a) < 2:
        return 2 * np.pi
    return float(np.max(np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))))


def arc_statistics(angles, arc, widen=0.05, deep=0.2, boundary_modes=None):
    """Containment and fill statistics of eigen-angles against an arc."""
    angles = np.asarray(angles)
    inside = arc.contains(angles, widen)
    deep_out = ~arc.contains(angles, deep)
    stats = {
        'count': int(len(angles)),
        'in_arc_fraction': float(np.mean(inside)) if len(angles) else 1.0,
        'deep_in_gap': int(np.sum(deep_out)),
    }
    if boundary_modes is not None:
        stats['deep_allowed'] = int(boundary_modes)
    u = np.sort(arc.offset(angles[arc.contains(angles)]))
    if arc.full:
        gaps = np.diff(np.concatenate([u, [u[0] + 2 * np.pi]])) if len(u) else np.array([2 * np.pi])
    else:
        gaps = np.diff(np.concatenate([[0.0], u, [arc.length]]))
    mean_gap = float(np.mean(gaps)) if len(gaps) else 0.0
    stats['max_gap_in_arc'] = float(np.max(gaps, initial=0.0))
    stats['mean_gap_in_arc'] = mean_gap
    stats['gap_ratio'] = stats['max_gap_in_arc'] / mean_gap if mean_gap else np.inf
    return stats


# -- Borg family ------------------------------------------------------------------------

LADDER_KEYS = ('adjacent_product_left', 'adjacent_product_right', 'rho_intertwine_right',
               'rho_intertwine_left', 'two_step_sum', 'modulus_pair_sum', 'phase_recursion',
               'constant_modulus')


def borg_identity_ladder(seq, arc, ks=range(-6, 7), tol=DEFAULT_TOL):
    """Residuals of the coefficient identities satisfied by the Borg family."""
    th0, th1 = arc.theta0, arc.theta1
    c2 = np.cos((th1 - th0) / 4) ** 2
    ph = np.exp(0.5j * (th0 + th1))
    ks = list(ks)
    A = seq.alphas(min(ks) - 1, max(ks) + 2)
    r, rt = rho_pair(A, tol)
    I = np.eye(seq.m)
    H = adjoint
    res = dict.fromkeys(LADDER_KEYS, 0.0)

    def upd(key, X):
        res[key] = max(res[key], float(np.linalg.norm(X, 2)))

    for k in ks:
        i = k - (min(ks) - 1)
        a_m, a0, a1, a2 = A[i - 1], A[i], A[i + 1], A[i + 2]
        upd('adjacent_product_left', H(a1) @ a0 + c2 / ph * I)
        upd('adjacent_product_right', a0 @ H(a1) + c2 / ph * I)
        upd('rho_intertwine_right', H(a1) @ rt[i] - r[i] @ H(a1))
        upd('rho_intertwine_left', rt[i] @ a_m - a_m @ r[i])
        upd('two_step_sum', a0 @ H(a2) + a_m @ H(a1) - 2 * c2 / ph ** 2 * I)
        upd('modulus_pair_sum', H(a0) @ a0 + H(a1) @ a1 - 2 * c2 * I)
        upd('phase_recursion', a1 + ph * a0)
        upd('constant_modulus', H(a0) @ a0 - c2 * I)
    return res


def _scalar_stats(seq, arc, gamma, m, N, n, r, k0, J, workers):
    t = build_centered(seq, k0, N, boundary=gamma)
    ang = spectrum(t)
    stats = arc_statistics(ang, arc, boundary_modes=4 * m)
    xi = xi_of_operator(seq, k0, n, (r,), n_sites=sites_for_radius(r),
                        boundary=gamma, workers=workers)
    xi_dev = xi_deviation(xi, borg_xi(arc, m, n), arc)
    norm_dev = float(np.linalg.norm(circle_quadrature(xi.values), 2))
    tr = trace_check_with_xi(seq, k0, J, xi)
    return stats, xi_dev, norm_dev, tr


def borg_verify(arc, gamma, m=None, N=512, n=4096, r=1 - 1e-3, k0=0, J=3,
                rng=None, tol_ladder=1e-12, tol_xi=0.05, tol_trace=5e-3,
                tol_invariance=1e-9, workers=None):
    """Composite check of the Borg family for one arc and one gamma.

    Sub-checks: (a) coefficient identities, (b) spectrum containment and fill,
    (c) Xi against the closed-form step profile, (d) trace formulas of order
    1..J with the computed Xi, (e) the same scalar statistics for a second,
    random gamma. Truncations use ``gamma`` as cut matrix so that changing
    gamma is an exact unitary conjugation.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=complex))
    m = gamma.shape[0] if m is None else m
    seq = borg_sequence(arc.theta0, arc.theta1, gamma)
    ladder = borg_identity_ladder(seq, arc)
    stats, xi_dev, norm_dev, tr = _scalar_stats(seq, arc, gamma, m, N, n, r, k0, J, workers)

    rng = np.random.default_rng(0) if rng is None else rng
    from .linalg_core import random_unitary
    g2 = random_unitary(m, rng)
    seq2 = borg_sequence(arc.theta0, arc.theta1, g2)
    stats2, xi_dev2, norm_dev2, tr2 = _scalar_stats(seq2, arc, g2, m, N, n, r, k0, J, workers)
    a_vals = [stats['in_arc_fraction'], stats['gap_ratio'], xi_dev, norm_dev] + tr.deviations
    b_vals = [stats2['in_arc_fraction'], stats2['gap_ratio'], xi_dev2, norm_dev2] + tr2.deviations
    invariance = float(np.max(np.abs(np.array(a_vals) - np.array(b_vals))))
    if stats['deep_in_gap'] != stats2['deep_in_gap']:
        invariance = max(invariance, 1.0)

    checks = {
        'ladder': max(ladder.values()) <= tol_ladder,
        'containment': (stats['in_arc_fraction'] >= 0.99
                        and stats['deep_in_gap'] <= 4 * m
                        and stats['gap_ratio'] <= 10),
        'xi': xi_dev <= tol_xi and norm_dev < 1e-2,
        'trace': tr.max_deviation <= tol_trace,
        'gamma_invariance': invariance <= tol_invariance,
    }
    return {
        'schema': SCHEMA,
        'arc': [arc.theta0, arc.theta1],
        'm': m, 'N': N, 'grid_n': n, 'r': r, 'k0': k0,
        'ladder': ladder,
        'spectrum': stats,
        'xi_deviation': xi_dev,
        'xi_normalization': norm_dev,
        'trace': tr,
        'gamma_invariance': invariance,
        'checks': checks,
        'ok': all(checks.values()),
    }


def equivalence_check(seq, gamma1, gamma2, N=128, k0=0, boundary=None, tol=DEFAULT_TOL):
    """Largest elementwise gap between the sorted eigen-angles of U_alpha and U_beta.

    The cut matrix of the conjugated truncation is conjugated along with the
    coefficients, so the two finite matrices are exactly unitarily equivalent.
    """
    g1 = np.asarray(gamma1, dtype=complex)
    g2 = np.asarray(gamma2, dtype=complex)
    B = np.eye(seq.m, dtype=complex) if boundary is None else np.asarray(boundary, dtype=complex)
    ta = build_centered(seq, k0, N, B, tol)
    tb = build_centered(conjugate_sequence(seq, g1, g2, tol), k0, N, g1 @ B @ adjoint(g2), tol)
    a = spectrum(ta, tol)
    b = spectrum(tb, tol)
    # cut the circle in the middle of the widest gap so both lists sort alike
    ext = np.concatenate([a, [a[0] + 2 * np.pi]])
    i = int(np.argmax(np.diff(ext)))
    cut = 0.5 * (ext[i] + ext[i + 1])
    a = np.sort(np.mod(a - cut, 2 * np.pi))
    b = np.sort(np.mod(b - cut, 2 * np.pi))
    return float(np.max(np.abs(a - b)))


def monotonicity_check(seq, arc, k0=0, x0=None, r=1 - 1e-3, samples=64, collar=0.05):
    """Sample ``Re(-i m_x0(r zeta))`` along the gap; report strict decrease."""
    if arc.full:
        raise InvalidArc('a full-circle arc has no gap')
    m = seq.m
    x0 = np.eye(m)[0] if x0 is None else np.asarray(x0, dtype=complex)
    theta = np.linspace(arc.theta1 + collar, arc.theta0 + 2 * np.pi - collar, samples)
    z = r * np.exp(1j * theta)
    M = m11_from_pair(schur_pair(seq, z, k0), k0)
    h = np.real(-1j * np.einsum('i,nij,j->n', x0.conj(), M, x0))
    d = np.diff(h)
    return {'theta': theta, 'values': h, 'max_increment': float(np.max(d)),
            'decreasing': bool(np.all(d < 0))}


# -- serialisation -----------------------------------------------------------------------

def to_jsonable(obj):
    """Recursively convert reports to JSON-compatible values.

    Complex numbers become ``[re, im]``; arrays become nested lists.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        d = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for extra in ('max_deviation', 'ok'):
            if hasattr(obj, extra):
                d[extra] = to_jsonable(getattr(obj, extra))
        return d
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj
