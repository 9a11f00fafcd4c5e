"""Doubly infinite sequences of matrix Verblunsky coefficients.

A sequence is a finite window of explicitly stored coefficients plus an
extension rule that supplies every coefficient outside the window, so any
integer range can be queried.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractivityViolated, InvalidArc, NotUnitary
from .linalg_core import (DEFAULT_TOL, adjoint, hermitian_sqrt, is_unitary,
                          operator_norm)

__all__ = ['Zero', 'Borg', 'Periodic', 'VerblunskySequence', 'ThetaBlock',
           'ValidationReport', 'free_sequence', 'borg_sequence',
           'borg_parameters', 'rho', 'rho_tilde', 'rho_pair', 'theta_block',
           'conjugate_sequence', 'validate', 'sequence_to_dict',
           'sequence_from_dict', 'dump_sequence', 'load_sequence']


@dataclass(frozen=True)
class Zero:
    """alpha_k = 0 outside the window."""


@dataclass(frozen=True)
class Borg:
    """alpha_k = g**k * a * gamma outside the window."""
    theta0: float
    theta1: float
    gamma: np.ndarray = field(compare=False)

    @property
    def g(self):
        return -np.exp(0.5j * (self.theta0 + self.theta1))

    @property
    def a(self):
        return np.cos((self.theta1 - self.theta0) / 4)


@dataclass(frozen=True)
class Periodic:
    """The window repeats with period ``len(window)``."""


@dataclass(frozen=True)
class VerblunskySequence:
    m: int
    k_min: int
    window: np.ndarray = field(compare=False)
    extension: object = Zero()

    def __post_init__(self):
        w = np.asarray(self.window, dtype=complex)
        if w.size == 0:
            w = np.zeros((0, self.m, self.m), dtype=complex)
        if w.ndim != 3 or w.shape[1:] != (self.m, self.m):
            raise ValueError('window must have shape (n, m, m)')
        if isinstance(self.extension, Periodic) and len(w) == 0:
            raise ValueError('periodic extension needs a nonempty window')
        w.setflags(write=False)
        object.__setattr__(self, 'window', w)

    @property
    def k_max(self):
        return self.k_min + len(self.window) - 1

    def alphas(self, k_lo, k_hi):
        """Coefficients for ``k_lo <= k <= k_hi`` as an array ``(n, m, m)``."""
        ks = np.arange(k_lo, k_hi + 1)
        out = np.zeros((len(ks), self.m, self.m), dtype=complex)
        ext = self.extension
        if isinstance(ext, Borg):
            out[:] = (ext.g ** ks)[:, None, None] * (ext.a * ext.gamma)
        elif isinstance(ext, Periodic):
            out[:] = self.window[(ks - self.k_min) % len(self.window)]
        inside = (ks >= self.k_min) & (ks <= self.k_max)
        out[inside] = self.window[ks[inside] - self.k_min]
        return out

    def alpha(self, k):
        return self.alphas(k, k)[0]

    def with_sites(self, updates):
        """Copy with the coefficients at the given sites replaced.

        ``updates`` maps site index to an ``(m, m)`` matrix; the window grows
        to cover them, filled from the extension rule.
        """
        if not updates:
            return self
        ks = list(updates)
        lo = min(ks + ([self.k_min] if len(self.window) else []))
        hi = max(ks + ([self.k_max] if len(self.window) else []))
        if isinstance(self.extension, Periodic):
            raise ValueError('site overrides would break the period')
        win = self.alphas(lo, hi).copy()
        for k, a in updates.items():
            win[k - lo] = np.asarray(a, dtype=complex)
        return VerblunskySequence(self.m, lo, win, self.extension)


@dataclass(frozen=True)
class ThetaBlock:
    k: int
    block: np.ndarray


@dataclass
class ValidationReport:
    k_lo: int
    k_hi: int
    margins: np.ndarray
    failures: list

    @property
    def ok(self):
        return not self.failures


def free_sequence(m):
    return VerblunskySequence(m, 0, np.zeros((0, m, m)), Zero())


def borg_parameters(theta0, theta1):
    """Return ``(g, a)`` for the arc ``[theta0, theta1]``."""
    _check_arc(theta0, theta1)
    return -np.exp(0.5j * (theta0 + theta1)), np.cos((theta1 - theta0) / 4)


def _check_arc(theta0, theta1):
    if not 0 <= theta0 < 2 * np.pi:
        raise InvalidArc('theta0 must lie in [0, 2*pi)')
    if not theta0 < theta1 <= theta0 + 2 * np.pi + 1e-14:
        raise InvalidArc('need theta0 < theta1 <= theta0 + 2*pi')


def borg_sequence(theta0, theta1, gamma, tol=DEFAULT_TOL):
    gamma = np.atleast_2d(np.asarray(gamma, dtype=complex))
    _check_arc(theta0, theta1)
    if not is_unitary(gamma, tol.unitary):
        raise NotUnitary('gamma must be unitary')
    m = gamma.shape[0]
    return VerblunskySequence(m, 0, np.zeros((0, m, m)),
                              Borg(float(theta0), float(theta1), gamma))


def rho_pair(alpha, tol=DEFAULT_TOL):
    """``(rho, rho_tilde)`` of a coefficient or a stack of coefficients."""
    alpha = np.asarray(alpha, dtype=complex)
    norms = np.atleast_1d(operator_norm(alpha))
    if norms.size and np.max(norms) >= 1 - tol.contraction:
        raise ContractivityViolated(
            'coefficient norm %.16g is not < 1' % np.max(norms))
    ident = np.eye(alpha.shape[-1])
    r = hermitian_sqrt(ident - adjoint(alpha) @ alpha, tol)
    rt = hermitian_sqrt(ident - alpha @ adjoint(alpha), tol)
    return r, rt


def rho(seq, k, tol=DEFAULT_TOL):
    try:
        return rho_pair(seq.alpha(k), tol)[0]
    except ContractivityViolated as exc:
        raise ContractivityViolated(str(exc), site=k) from None


def rho_tilde(seq, k, tol=DEFAULT_TOL):
    try:
        return rho_pair(seq.alpha(k), tol)[1]
    except ContractivityViolated as exc:
        raise ContractivityViolated(str(exc), site=k) from None


def theta_matrix(alpha, r, rt):
    return np.block([[-alpha, rt], [r, adjoint(alpha)]])


def theta_block(seq, k, tol=DEFAULT_TOL):
    a = seq.alpha(k)
    try:
        r, rt = rho_pair(a, tol)
    except ContractivityViolated as exc:
        raise ContractivityViolated(str(exc), site=k) from None
    return ThetaBlock(k, theta_matrix(a, r, rt))


def conjugate_sequence(seq, gamma1, gamma2, tol=DEFAULT_TOL):
    """The sequence ``gamma1 @ alpha_k @ gamma2^*`` for all k."""
    g1 = np.asarray(gamma1, dtype=complex)
    g2 = np.asarray(gamma2, dtype=complex)
    if not (is_unitary(g1, tol.unitary) and is_unitary(g2, tol.unitary)):
        raise NotUnitary('gamma1 and gamma2 must be unitary')
    win = g1 @ seq.window @ adjoint(g2)
    ext = seq.extension
    if isinstance(ext, Borg):
        ext = Borg(ext.theta0, ext.theta1, g1 @ ext.gamma @ adjoint(g2))
    return VerblunskySequence(seq.m, seq.k_min, win, ext)


def validate(seq, k_lo, k_hi, tol=DEFAULT_TOL):
    """Per-site margins ``1 - ||alpha_k||``; failures where margin is too thin."""
    margins = 1.0 - np.atleast_1d(operator_norm(seq.alphas(k_lo, k_hi)))
    bad = np.nonzero(margins <= tol.contraction)[0]
    return ValidationReport(k_lo, k_hi, margins, [int(k_lo + i) for i in bad])


# -- JSON -------------------------------------------------------------------

def _mat_to_list(a):
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def _mat_from_list(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def sequence_to_dict(seq):
    ext = seq.extension
    if isinstance(ext, Borg):
        ext_d = {'kind': 'borg', 'theta0': ext.theta0, 'theta1': ext.theta1,
                 'gamma': _mat_to_list(ext.gamma)}
    elif isinstance(ext, Periodic):
        ext_d = {'kind': 'periodic', 'period': len(seq.window)}
    else:
        ext_d = {'kind': 'zero'}
    return {'m': seq.m, 'k_min': seq.k_min, 'k_max': seq.k_max,
            'alphas': [_mat_to_list(a) for a in seq.window],
            'extension': ext_d}


def sequence_from_dict(d):
    m = int(d['m'])
    alphas = [_mat_from_list(a) for a in d.get('alphas', [])]
    window = np.array(alphas) if alphas else np.zeros((0, m, m))
    ext_d = d.get('extension', {'kind': 'zero'})
    kind = ext_d.get('kind', 'zero')
    if kind == 'borg':
        ext = Borg(float(ext_d['theta0']), float(ext_d['theta1']),
                   _mat_from_list(ext_d['gamma']))
    elif kind == 'periodic':
        ext = Periodic()
    elif kind == 'zero':
        ext = Zero()
    else:
        raise ValueError('unknown extension kind %r' % kind)
    return VerblunskySequence(m, int(d.get('k_min', 0)), window, ext)


def dump_sequence(seq, path: Optional[str] = None):
    text = json.dumps(sequence_to_dict(seq), indent=1)
    if path is not None:
        with open(path, 'w') as fh:
            fh.write(text)
    return text


def load_sequence(source):
    """Load from a path or from a JSON string."""
    if isinstance(source, str) and source.lstrip().startswith('{'):
        return sequence_from_dict(json.loads(source))
    with open(source) as fh:
        return sequence_from_dict(json.load(fh))
