"""Command line front-end.

Usage::

    cmv <spectrum|trace|xi|reflectionless|borg-verify|resolvent-check>
        --config CONFIG.json [--out DIR] [--seed N] [--grid-n N]

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis as an
from .cmv_operator import build_centered
from .errors import ArgumentError, ConfigError, NumericalError
from .herglotz import circle_quadrature, write_matrix_csv
from .linalg_core import random_contraction, random_unitary
from .verblunsky import (VerblunskySequence, Periodic, borg_sequence, free_sequence,
                         load_sequence)
from .weyl import resolvent_formula_check

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    'in_arc': 0.99,
    'trace': 5e-3,
    'xi': 0.05,
    'normalization': 1e-2,
    'reflectionless': 0.05,
    'resolvent': 1e-8,
}


@dataclass
class RunConfig:
    m: int = 1
    sequence: dict = field(default_factory=lambda: {'kind': 'free'})
    perturb: list = field(default_factory=list)
    n_sites: int = 512
    k0: int = 0
    grid_n: int = 4096
    r_final: float = 1 - 1e-3
    J: int = 2
    arc: list = None
    ks: list = None
    resolvent: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    out: str = 'out'
    seed: int = 0

    def __post_init__(self):
        tol = dict(DEFAULT_TOLERANCES)
        unknown = set(self.tolerances) - set(tol)
        if unknown:
            raise ConfigError('unknown tolerances: %s' % sorted(unknown))
        tol.update(self.tolerances)
        if any(not v > 0 for v in tol.values()):
            raise ConfigError('tolerances must be positive')
        self.tolerances = tol
        if self.m < 1:
            raise ConfigError('m must be positive')
        if self.grid_n < 4 or self.grid_n & (self.grid_n - 1):
            raise ConfigError('grid_n must be a power of two')
        if not 0 < self.r_final < 1:
            raise ConfigError('r_final must lie in (0, 1)')
        if self.J < 1 or self.J > 8:
            raise ConfigError('J must lie in 1..8')


def load_config(path, overrides):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError('cannot read config: %s' % exc) from exc
    if not isinstance(raw, dict):
        raise ConfigError('config must be a JSON object')
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.base_dir = os.path.dirname(os.path.abspath(path))
    return cfg


def _matrix(desc, m, rng, what):
    if desc is None or desc == 'identity':
        return np.eye(m, dtype=complex)
    if desc == 'random':
        return random_unitary(m, rng)
    try:
        A = np.array([[complex(*x) if isinstance(x, list) else complex(x) for x in row]
                      for row in desc])
    except (TypeError, ValueError) as exc:
        raise ConfigError('bad %s matrix' % what) from exc
    if A.shape != (m, m):
        raise ConfigError('%s must be %dx%d' % (what, m, m))
    return A


def make_sequence(cfg, rng):
    d = cfg.sequence
    kind = d.get('kind')
    m = cfg.m
    if kind == 'free':
        seq = free_sequence(m)
    elif kind == 'borg':
        seq = borg_sequence(float(d['theta0']), float(d['theta1']),
                            _matrix(d.get('gamma'), m, rng, 'gamma'))
    elif kind == 'periodic':
        win = np.array([_matrix(a, m, rng, 'alpha') for a in d['alphas']])
        seq = VerblunskySequence(m, int(d.get('k_min', 0)), win, Periodic())
    elif kind == 'random':
        lo, hi = d.get('support', [-20, 19])
        win = np.array([random_contraction(m, rng, d.get('max_norm', 0.9))
                        for _ in range(hi - lo + 1)])
        seq = VerblunskySequence(m, lo, win)
    elif kind == 'file':
        path = os.path.join(getattr(cfg, 'base_dir', '.'), d['path'])
        seq = load_sequence(path)
        if seq.m != m:
            raise ConfigError('sequence file has m=%d, config m=%d' % (seq.m, m))
    else:
        raise ConfigError('unknown sequence kind %r' % kind)
    updates = {}
    for p in cfg.perturb:
        k = int(p['site'])
        delta = p['delta']
        D = (complex(*delta) if isinstance(delta, list) and not isinstance(delta[0], list)
             else delta)
        D = D * np.eye(m) if np.isscalar(D) else _matrix(D, m, rng, 'delta')
        updates[k] = seq.alpha(k) + D
    return seq.with_sites(updates)


def _arc(cfg):
    if cfg.arc is not None:
        return an.ArcSpec(float(cfg.arc[0]), float(cfg.arc[1]))
    d = cfg.sequence
    if d.get('kind') == 'borg':
        return an.ArcSpec(float(d['theta0']), float(d['theta1']))
    return an.ArcSpec(0.0, 2 * np.pi)


def _schedule(cfg):
    return (cfg.r_final,)


def _write_json(path, obj):
    with open(path, 'w') as fh:
        json.dump(an.to_jsonable(obj), fh, indent=1, sort_keys=True)
        fh.write('\n')


def _report(cfg, command, body, ok):
    rep = {'schema': an.SCHEMA, 'command': command, 'ok': bool(ok),
           'config': {k: v for k, v in asdict(cfg).items()}}
    rep.update(body)
    return rep


# -- commands ------------------------------------------------------------------

def cmd_spectrum(cfg, rng):
    seq = make_sequence(cfg, rng)
    arc = _arc(cfg)
    t = build_centered(seq, cfg.k0, cfg.n_sites)
    sd = an.spectral_measure(t, cfg.k0)
    with open(os.path.join(cfg.out, 'eigenangles.csv'), 'w') as fh:
        fh.write('index,theta\n')
        for i, a in enumerate(sd.angles):
            fh.write('%d,%r\n' % (i, float(a)))
    write_matrix_csv(os.path.join(cfg.out, 'measure.csv'), sd.angles, sd.weights)
    stats = an.arc_statistics(sd.angles, arc, boundary_modes=4 * cfg.m)
    stats['max_gap'] = an.max_gap(sd.angles)
    stats['mass_defect'] = float(np.linalg.norm(sd.weights.sum(0) - np.eye(cfg.m), 2))
    ok = stats['in_arc_fraction'] >= cfg.tolerances['in_arc']
    _write_json(os.path.join(cfg.out, 'summary.json'),
                _report(cfg, 'spectrum', {'arc': [arc.theta0, arc.theta1], **stats}, ok))
    return ok


def cmd_trace(cfg, rng):
    seq = make_sequence(cfg, rng)
    n_sites = max(cfg.n_sites, an.sites_for_radius(cfg.r_final))
    tr = an.trace_check(seq, cfg.k0, cfg.J, cfg.grid_n, _schedule(cfg), n_sites)
    ok = tr.max_deviation <= cfg.tolerances['trace']
    _write_json(os.path.join(cfg.out, 'trace_report.json'),
                _report(cfg, 'trace', {'trace': tr}, ok))
    return ok


def cmd_xi(cfg, rng):
    seq = make_sequence(cfg, rng)
    arc = _arc(cfg)
    n_sites = max(cfg.n_sites, an.sites_for_radius(cfg.r_final))
    xi = an.xi_of_operator(seq, cfg.k0, cfg.grid_n, _schedule(cfg), n_sites)
    write_matrix_csv(os.path.join(cfg.out, 'xi.csv'), xi.theta, xi.values)
    norm = float(np.linalg.norm(circle_quadrature(xi.values), 2))
    body = {'normalization': norm, 'skipped': list(xi.skipped),
            'bounds_ok': xi.bounds_ok(), 'arc': [arc.theta0, arc.theta1]}
    ok = norm < cfg.tolerances['normalization'] and xi.bounds_ok()
    if cfg.sequence.get('kind') in ('borg', 'free') and not cfg.perturb:
        dev = an.xi_deviation(xi, an.borg_xi(arc, cfg.m, cfg.grid_n), arc)
        body['closed_form_deviation'] = dev
        ok = ok and dev <= cfg.tolerances['xi']
    _write_json(os.path.join(cfg.out, 'xi_report.json'), _report(cfg, 'xi', body, ok))
    return ok


def cmd_reflectionless(cfg, rng):
    seq = make_sequence(cfg, rng)
    arc = _arc(cfg)
    ks = tuple(cfg.ks) if cfg.ks else (cfg.k0, cfg.k0 + 1)
    n = min(cfg.grid_n, 512)
    rep = an.reflectionless_check(seq, arc, n, cfg.r_final, cfg.tolerances['reflectionless'], ks)
    _write_json(os.path.join(cfg.out, 'reflectionless_report.json'),
                _report(cfg, 'reflectionless', {'battery': rep}, rep.ok))
    return rep.ok


def cmd_borg_verify(cfg, rng):
    d = cfg.sequence
    if d.get('kind') != 'borg':
        raise ConfigError('borg-verify needs a borg sequence')
    arc = _arc(cfg)
    gamma = _matrix(d.get('gamma'), cfg.m, rng, 'gamma')
    rep = an.borg_verify(arc, gamma, cfg.m, cfg.n_sites, cfg.grid_n, cfg.r_final,
                         cfg.k0, max(3, cfg.J), rng=rng,
                         tol_xi=cfg.tolerances['xi'], tol_trace=cfg.tolerances['trace'])
    _write_json(os.path.join(cfg.out, 'borg_report.json'),
                _report(cfg, 'borg-verify', rep, rep['ok']))
    return rep['ok']


def cmd_resolvent_check(cfg, rng):
    seq = make_sequence(cfg, rng)
    r = cfg.resolvent
    zs = r.get('z', [[0.5, 0.0]])
    zs = [complex(*z) if isinstance(z, list) else complex(z) for z in zs]
    pairs = r.get('pairs')
    if pairs is None:
        span = int(r.get('span', 10))
        pairs = [tuple(int(x) for x in rng.integers(-span, span + 1, size=2))
                 for _ in range(int(r.get('count', 20)))]
    pairs = [tuple(p) for p in pairs]
    rows = []
    worst = 0.0
    for z in zs:
        for chk in resolvent_formula_check(seq, z, pairs, cfg.k0, int(r.get('padding', 120))):
            rows.append({'z': z, 'k': chk.k, 'kp': chk.kp, 'deviation': chk.deviation})
            worst = max(worst, chk.deviation)
    with open(os.path.join(cfg.out, 'resolvent.csv'), 'w') as fh:
        fh.write('z_re,z_im,k,kp,deviation\n')
        for row in rows:
            fh.write('%r,%r,%d,%d,%r\n' % (row['z'].real, row['z'].imag, row['k'],
                                           row['kp'], row['deviation']))
    ok = worst <= cfg.tolerances['resolvent']
    _write_json(os.path.join(cfg.out, 'resolvent_report.json'),
                _report(cfg, 'resolvent-check', {'max_deviation': worst, 'entries': rows}, ok))
    return ok


COMMANDS = {
    'spectrum': cmd_spectrum,
    'trace': cmd_trace,
    'xi': cmd_xi,
    'reflectionless': cmd_reflectionless,
    'borg-verify': cmd_borg_verify,
    'resolvent-check': cmd_resolvent_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog='cmv', description='Block CMV verification runs.')
    p.add_argument('command', choices=sorted(COMMANDS))
    p.add_argument('--config', required=True, help='JSON run configuration')
    p.add_argument('--out', help='output directory (overrides config)')
    p.add_argument('--seed', type=int, help='RNG seed (overrides config)')
    p.add_argument('--grid-n', type=int, dest='grid_n', help='circle grid size')
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {'out': args.out, 'seed': args.seed,
                                        'grid_n': args.grid_n})
        os.makedirs(cfg.out, exist_ok=True)
        rng = np.random.default_rng(cfg.seed)
        ok = COMMANDS[args.command](cfg, rng)
    except (ArgumentError, KeyError) as exc:
        print('config error: %s' % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print('numerical failure: %s' % exc, file=sys.stderr)
        return EXIT_NUMERIC
    print('%s: %s' % (args.command, 'pass' if ok else 'FAIL'))
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
