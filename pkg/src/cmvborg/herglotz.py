"""Caratheodory and Schur matrix functions on the unit disk.

Evaluators are plain callables wrapped with their block size and a short
provenance tag. They accept a scalar ``z`` (returning ``(m, m)``) or an
array of points (returning ``(..., m, m)``).
"""

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (LogDomainViolation, NonInvertible, SingularPivot,
                     ScheduleTooCoarse, SpectrumNotInRightHalfPlane)
from .linalg_core import DEFAULT_TOL, adjoint, hermitian_part, principal_log

__all__ = ['CaratheodoryEval', 'SchurEval', 'MatrixCircleMeasure',
           'XiProfile', 'circle_grid', 'default_schedule', 'cayley_to_schur',
           'schur_to_cayley', 'poisson_integral', 'uniform_measure',
           'stieltjes_invert', 'exp_herglotz', 'xi_from_values', 'reflect',
           'localize_scalar', 'circle_quadrature', 'fourier_coefficient',
           'write_matrix_csv', 'read_matrix_csv']


def _as_points(z):
    z = np.asarray(z, dtype=complex)
    return z, z.ndim == 0


@dataclass(frozen=True)
class CaratheodoryEval:
    """``z -> F(z)`` on the disk.

    ``orientation`` is ``'caratheodory'`` (Re F >= 0) or
    ``'anti-caratheodory'`` (Re F <= 0).
    """
    func: Callable = field(repr=False)
    m: int
    source: str = 'closed-form'
    orientation: str = 'caratheodory'

    def __call__(self, z):
        z, scalar = _as_points(z)
        out = np.asarray(self.func(z.reshape(-1)), dtype=complex)
        out = out.reshape(z.shape + (self.m, self.m))
        return out

    @classmethod
    def constant(cls, A, source='constant'):
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        return cls(lambda z: np.broadcast_to(A, z.shape + A.shape), A.shape[0], source)


@dataclass(frozen=True)
class SchurEval:
    """``z -> Phi(z)``; with ``inverse_form`` it evaluates ``Phi^{-1}`` instead.

    The inverse form is what an anti-Caratheodory function maps to: its
    ``Phi^{-1}`` is the Schur function, ``Phi`` itself need not exist.
    """
    func: Callable = field(repr=False)
    m: int
    source: str = 'closed-form'
    inverse_form: bool = False

    def __call__(self, z):
        z, scalar = _as_points(z)
        out = np.asarray(self.func(z.reshape(-1)), dtype=complex)
        return out.reshape(z.shape + (self.m, self.m))


def _solve_right(A, B):
    """``A @ inv(B)`` for stacks, raising SingularPivot on failure."""
    try:
        X = adjoint(np.linalg.solve(adjoint(B), adjoint(A)))
    except np.linalg.LinAlgError as exc:
        raise SingularPivot(str(exc)) from exc
    if not np.all(np.isfinite(X)):
        raise SingularPivot('singular pivot in Cayley transform')
    return X


def _solve_left(A, B):
    """``inv(A) @ B`` for stacks."""
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularPivot(str(exc)) from exc
    if not np.all(np.isfinite(X)):
        raise SingularPivot('singular pivot in Cayley transform')
    return X


def cayley_values(F, anti=False):
    """Pointwise Cayley transform of Caratheodory values.

    Returns ``(F - I)(F + I)^{-1}``, or for ``anti=True`` the Schur matrix
    ``(F + I)(F - I)^{-1}`` of an anti-Caratheodory value.
    """
    I = np.eye(F.shape[-1])
    if anti:
        return _solve_right(F + I, F - I)
    return _solve_right(F - I, F + I)


def inverse_cayley_values(Phi, inverse_form=False):
    """Pointwise inverse of :func:`cayley_values`."""
    I = np.eye(Phi.shape[-1])
    if inverse_form:
        # Phi^{-1} = (F + I)(F - I)^{-1}  =>  F = (Phi^{-1} - I)^{-1}(Phi^{-1} + I)
        return _solve_left(Phi - I, Phi + I)
    return _solve_right(I + Phi, I - Phi)


def cayley_to_schur(F):
    anti = F.orientation != 'caratheodory'
    return SchurEval(lambda z: cayley_values(F(z), anti), F.m,
                     'cayley(%s)' % F.source, inverse_form=anti)


def schur_to_cayley(Phi):
    orient = 'anti-caratheodory' if Phi.inverse_form else 'caratheodory'
    return CaratheodoryEval(
        lambda z: inverse_cayley_values(Phi(z), Phi.inverse_form), Phi.m,
        'cayley^-1(%s)' % Phi.source, orient)


# -- measures -----------------------------------------------------------------

@dataclass(frozen=True)
class MatrixCircleMeasure:
    """Nonnegative matrix measure on the circle.

    ``kind='atoms'``: point masses ``weights[j]`` at ``angles[j]``.
    ``kind='grid'``: uniform cells centred at ``angles[j]`` carrying mass
    ``weights[j]``; integrals use the cell centres.
    """
    angles: np.ndarray
    weights: np.ndarray
    kind: str = 'atoms'
    clipped_mass: float = 0.0

    @property
    def m(self):
        return self.weights.shape[-1]

    @property
    def total_mass(self):
        return self.weights.sum(axis=0)

    def moment(self, p):
        """``oint conj(zeta)^p dOmega(zeta)``."""
        phase = np.exp(-1j * p * self.angles)
        return np.tensordot(phase, self.weights, axes=(0, 0))


def circle_grid(n):
    """Cell centres ``2*pi*(j + 1/2)/n``; cell edges fall on multiples of ``2*pi/n``."""
    return 2 * np.pi * (np.arange(n) + 0.5) / n


def default_schedule(r_final=1 - 1e-3, count=4):
    """Radii ``1 - 2**-q`` below ``r_final``, ending exactly at ``r_final``."""
    qmax = int(np.floor(-np.log2(1 - r_final)))
    qs = range(max(1, qmax - count + 2), qmax + 1)
    radii = [1 - 2.0 ** -q for q in qs if 1 - 2.0 ** -q < r_final]
    return tuple(radii[-(count - 1):]) + (r_final,)


def uniform_measure(m, n=1024):
    """``dmu_0 * I_m`` discretised on ``n`` cells."""
    w = np.broadcast_to(np.eye(m, dtype=complex) / n, (n, m, m)).copy()
    return MatrixCircleMeasure(circle_grid(n), w, kind='grid')


def poisson_integral(measure, C, z):
    """``iC + oint dOmega(zeta) (zeta + z)/(zeta - z)``."""
    z, scalar = _as_points(z)
    zf = z.reshape(-1)
    zeta = np.exp(1j * measure.angles)
    kern = (zeta[None, :] + zf[:, None]) / (zeta[None, :] - zf[:, None])
    out = np.tensordot(kern, measure.weights, axes=(1, 0))
    C = np.zeros((measure.m, measure.m)) if C is None else np.asarray(C)
    out = out + 1j * C
    return out.reshape(z.shape + (measure.m, measure.m))


def _psd_project(W, tol):
    Wh = hermitian_part(W)
    w, v = np.linalg.eigh(Wh)
    neg = np.clip(w, None, 0.0)
    clipped = float(-neg.sum())
    w = np.clip(w, 0.0, None)
    return (v * w[..., None, :]) @ adjoint(v), clipped


def stieltjes_invert(F, n, r_schedule=None, oversample=None, tol=DEFAULT_TOL):
    """Recover the measure of a Caratheodory evaluator on ``n`` cells.

    Each cell weight is ``(1/2pi) int_cell Re F(r e^{i theta}) d theta``. With
    two or more radii in the schedule, the last two are combined by
    Richardson extrapolation in ``1 - r`` towards the radial limit; the
    result is then projected onto PSD matrices and the clipped mass stored.
    """
    if r_schedule is None:
        r_schedule = default_schedule()
    radii = list(r_schedule)[-2:]
    mass_ref = hermitian_part(F(0.0))

    def cells(r):
        sub = oversample
        if sub is None:
            sub = max(1, int(np.ceil(24.0 / ((1 - r) * n))))
        th = 2 * np.pi * (np.arange(n * sub) + 0.5) / (n * sub)
        vals = hermitian_part(F(r * np.exp(1j * th)))
        return vals.reshape(n, sub, F.m, F.m).mean(axis=1) / n

    w = [cells(r) for r in radii]
    if len(w) == 2:
        (r1, r2), (w1, w2) = radii, w
        h1, h2 = 1 - r1, 1 - r2
        weights = (h1 * w2 - h2 * w1) / (h1 - h2)
    else:
        weights = w[0]
    weights, clipped = _psd_project(weights, tol)
    defect = np.linalg.norm(weights.sum(axis=0) - mass_ref, 2)
    if defect > tol.mass * max(1.0, np.linalg.norm(mass_ref, 2)):
        raise ScheduleTooCoarse('mass defect %.3e' % defect, defect)
    return MatrixCircleMeasure(circle_grid(n), weights, 'grid', clipped)


# -- exponential Herglotz representation --------------------------------------

@dataclass(frozen=True)
class XiProfile:
    """Grid samples of the Hermitian phase function ``Xi`` (``Upsilon - pi/2``)."""
    theta: np.ndarray
    values: np.ndarray
    r: float
    skipped: tuple = ()

    @property
    def n(self):
        return len(self.theta)

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def upsilon(self):
        return self.values + 0.5 * np.pi * np.eye(self.m)

    def bounds_ok(self, slack=0.02):
        w = np.linalg.eigvalsh(hermitian_part(self.values))
        return bool(np.all(np.abs(w) <= np.pi / 2 + slack))


def xi_from_values(values, theta, r, skip_bad=True):
    """``Im(log F)`` pointwise for F sampled at ``r e^{i theta}``.

    Points where F has spectrum outside the right half-plane are reported
    via ``skipped`` (their value is set to zero) or raise if ``skip_bad`` is
    false.
    """
    values = np.asarray(values, dtype=complex)
    out = np.zeros_like(values)
    bad = []
    if values.shape[-1] == 1:
        v = values[:, 0, 0]
        bad = list(np.nonzero(~(v.real > 0))[0])
        ok = v.real > 0
        out[ok, 0, 0] = np.angle(v[ok])
        if bad and not skip_bad:
            raise LogDomainViolation('log undefined at %d grid points' % len(bad), bad)
        return XiProfile(np.asarray(theta), out, float(r), tuple(int(i) for i in bad))
    for i in range(len(theta)):
        try:
            L = principal_log(values[i])
        except SpectrumNotInRightHalfPlane:
            bad.append(i)
            continue
        out[i] = (L - adjoint(L)) / 2j
    if bad and not skip_bad:
        raise LogDomainViolation('log undefined at %d grid points' % len(bad), bad)
    return XiProfile(np.asarray(theta), out, float(r), tuple(bad))


def exp_herglotz(F, n, r_schedule=None, skip_bad=True):
    """``(D, Xi)`` of the exponential Herglotz representation of F.

    ``D = -Re(log F(0))``; ``Xi`` is ``Im(log F)`` on the circle grid at the
    final radius of the schedule.
    """
    F0 = F(0.0)
    try:
        np.linalg.inv(F0)
        L0 = principal_log(F0)
    except np.linalg.LinAlgError as exc:
        raise NonInvertible('F(0) is singular') from exc
    D = -hermitian_part(L0)
    r = (r_schedule or default_schedule())[-1]
    theta = circle_grid(n)
    vals = F(r * np.exp(1j * theta))
    return D, xi_from_values(vals, theta, r, skip_bad)


def reflect(F, z):
    """Value at ``|z| > 1`` of the symmetric extension: ``-F(1/conj(z))^*``."""
    z, scalar = _as_points(z)
    if np.any(np.abs(z) <= 1):
        raise ValueError('reflect needs |z| > 1')
    return -adjoint(F(1 / np.conj(z)))


def localize_scalar(F, x0):
    """Scalar Caratheodory function ``z -> <x0, F(z) x0>``."""
    x0 = np.asarray(x0, dtype=complex)
    if abs(np.linalg.norm(x0) - 1) > 1e-12:
        raise ValueError('x0 must be a unit vector')

    def f(z):
        return np.einsum('i,...ij,j->...', x0.conj(), F(z), x0)[..., None, None]

    return CaratheodoryEval(f, 1, 'localize(%s)' % F.source, F.orientation)


# -- quadrature ---------------------------------------------------------------

def circle_quadrature(values):
    """``oint f dmu_0`` from samples at the cell centres (midpoint rule)."""
    return np.mean(np.asarray(values), axis=0)


def fourier_coefficient(values, j, piecewise_constant=False):
    """``oint f(zeta) conj(zeta)^j dmu_0`` from cell-centre samples.

    With ``piecewise_constant`` the samples are taken as cell averages and
    ``conj(zeta)^j`` is integrated exactly over each cell, which is exact
    for step functions whose jumps sit on cell edges.
    """
    values = np.asarray(values)
    n = values.shape[0]
    theta = circle_grid(n)
    phase = np.exp(-1j * j * theta)
    c = np.tensordot(phase, values, axes=(0, 0)) / n
    if piecewise_constant and j:
        c = c * np.sinc(j / n)
    return c


# -- CSV ----------------------------------------------------------------------

def write_matrix_csv(path, theta, values):
    """One row per angle: ``theta`` then re/im of each entry, row-major."""
    values = np.asarray(values)
    m = values.shape[-1]
    header = ['theta']
    for i in range(m):
        for j in range(m):
            header += ['re_%d%d' % (i, j), 'im_%d%d' % (i, j)]
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, v in zip(theta, values):
            row = [repr(float(t))]
            for x in np.asarray(v).ravel():
                row += [repr(float(x.real)), repr(float(x.imag))]
            w.writerow(row)


def read_matrix_csv(path):
    with open(path, newline='') as fh:
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float)
    m = int(round(np.sqrt((data.shape[1] - 1) / 2)))
    vals = data[:, 1::2] + 1j * data[:, 2::2]
    return data[:, 0], vals.reshape(-1, m, m)
