"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line (see ``record_acceptance`` in
``conftest.py``); the lines are printed at the end of the pytest run.
"""

import time

import numpy as np
import pytest

from cmvborg.analysis import (ArcSpec, arc_statistics, borg_identity_ladder, borg_xi,
                              equivalence_check, log_coeffs, max_gap, moments,
                              reflectionless_check, sites_for_radius, spectral_measure,
                              spectrum, trace_check, xi_deviation, xi_of_operator)
from cmvborg.cmv_operator import build_centered, diagonal_moment
from cmvborg.herglotz import (CaratheodoryEval, MatrixCircleMeasure, SchurEval,
                              cayley_to_schur, circle_quadrature, inverse_cayley_values,
                              cayley_values, poisson_integral, reflect, schur_to_cayley)
from cmvborg.linalg_core import operator_norm, random_contraction, random_unitary
from cmvborg.verblunsky import (VerblunskySequence, borg_sequence, free_sequence, rho_pair,
                                theta_block)
from cmvborg.weyl import (m11, resolvent_formula_check, riccati_chain, schur_minus,
                          schur_plus)

pytestmark = pytest.mark.slow

HALF = ArcSpec(np.pi / 2, 3 * np.pi / 2)
R = 1 - 1e-3
GRID = 4096


def eventually_free(rng, m, lo=-20, hi=19, max_norm=0.9):
    win = np.array([random_contraction(m, rng, max_norm) for _ in range(hi - lo + 1)])
    return VerblunskySequence(m, lo, win)


def disk_points(rng, n, rmax=0.95):
    return np.sqrt(rng.uniform(0, rmax ** 2, n)) * np.exp(2j * np.pi * rng.uniform(size=n))


def random_poisson(rng, m, count=5):
    ang = rng.uniform(0, 2 * np.pi, count)
    G = rng.normal(size=(count, m, m)) + 1j * rng.normal(size=(count, m, m))
    meas = MatrixCircleMeasure(ang, G @ np.conj(np.swapaxes(G, -1, -2)) / count)
    C = np.diag(rng.normal(size=m))
    return CaratheodoryEval(lambda z: poisson_integral(meas, C, z), m, 'poisson')


def test_criterion_1_borg_trace_identities(rng, record_acceptance):
    target = None
    moment_dev, quad_dev, times = [], [], []
    for m in (1, 2, 3):
        gamma = random_unitary(m, rng)
        seq = borg_sequence(HALF.theta0, HALF.theta1, gamma)
        target = -np.eye(m)
        L = log_coeffs(moments(build_centered(seq, 0, 64), 0, 2))
        moment_dev.append(max(np.linalg.norm(Lj - target, 2) for Lj in L))
        start = time.perf_counter()
        rep = trace_check(seq, 0, 2, n=GRID, r_schedule=(R,), n_sites=4096)
        times.append(time.perf_counter() - start)
        quad_dev.append(max(np.linalg.norm(Lj - target, 2) for Lj in rep.rhs))
    ok = max(moment_dev) < 1e-10 and max(quad_dev) < 5e-3 and max(times) <= 180
    record_acceptance(1, 'Borg trace identities L1 = L2 = -I', ok,
                      'moment %.1e, quadrature %s, seconds %s'
                      % (max(moment_dev), ['%.1e' % d for d in quad_dev],
                         ['%.0f' % t for t in times]))
    assert max(moment_dev) < 1e-10
    assert max(quad_dev) < 5e-3
    assert max(times) <= 180


def test_criterion_2_identity_ladder(rng, record_acceptance):
    worst = 0.0
    for i in range(10):
        m = 1 + i % 4
        th0 = rng.uniform(0, 2 * np.pi)
        arc = ArcSpec(th0, th0 + rng.uniform(0.05, 2 * np.pi - 0.05))
        seq = borg_sequence(arc.theta0, arc.theta1, random_unitary(m, rng))
        worst = max(worst, max(borg_identity_ladder(seq, arc).values()))
    ok = worst < 1e-12
    record_acceptance(2, 'coefficient identity ladder', ok, 'max residual %.1e' % worst)
    assert ok


def test_criterion_3_spectrum_containment(rng, record_acceptance):
    m = 2
    start = time.perf_counter()
    seq = borg_sequence(HALF.theta0, HALF.theta1, random_unitary(m, rng))
    ang = spectrum(build_centered(seq, 0, 512))
    stats = arc_statistics(ang, HALF, widen=0.05, deep=0.2, boundary_modes=4 * m)
    elapsed = time.perf_counter() - start
    ok = (stats['in_arc_fraction'] >= 0.99 and stats['deep_in_gap'] <= 4 * m
          and stats['gap_ratio'] <= 10 and elapsed <= 60)
    record_acceptance(3, 'spectrum containment', ok,
                      'in-arc %.4f, deep %d, gap ratio %.2f, %.1fs'
                      % (stats['in_arc_fraction'], stats['deep_in_gap'],
                         stats['gap_ratio'], elapsed))
    assert ok


def test_criterion_4_xi_step_profile(rng, record_acceptance):
    m = 2
    seq = borg_sequence(HALF.theta0, HALF.theta1, random_unitary(m, rng))
    start = time.perf_counter()
    xi = xi_of_operator(seq, 0, GRID, (R,), n_sites=sites_for_radius(R))
    elapsed = time.perf_counter() - start
    dev = xi_deviation(xi, borg_xi(HALF, m, GRID), HALF, collar=0.05)
    norm = float(np.linalg.norm(circle_quadrature(xi.values), 2))
    ok = dev <= 0.05 and norm < 1e-2 and elapsed <= 300
    record_acceptance(4, 'Xi step profile', ok,
                      'off-collar %.3g, normalization %.1e, %.0fs' % (dev, norm, elapsed))
    assert dev <= 0.05
    assert norm < 1e-2
    assert elapsed <= 300


def test_criterion_5_free_case(rng, record_acceptance):
    details = {}
    ok = True
    for m in (1, 2):
        seq = free_sequence(m)
        t = build_centered(seq, 0, 64)
        Mj = max(np.linalg.norm(M, 2) for M in moments(t, 0, 6))
        z = disk_points(rng, 100)
        F = m11(seq, z, 0)
        mdev = float(np.max(operator_norm(F - np.eye(m))))
        xi = xi_of_operator(seq, 0, 1024, (R,), n_sites=sites_for_radius(R))
        xdev = float(np.max(operator_norm(xi.values)))
        N = 128
        gap = max_gap(spectrum(build_centered(seq, 0, N)))
        bound = 3 * (2 * np.pi * m * 2 / N)
        details[m] = (Mj, mdev, xdev, gap / bound)
        ok &= Mj < 1e-12 and mdev < 1e-12 and xdev < 1e-6 and gap < bound
    record_acceptance(5, 'free-case degeneracy', ok,
                      '; '.join('m=%d M %.0e M11 %.0e Xi %.0e gap/bound %.2f' % ((k,) + v)
                                for k, v in details.items()))
    assert ok


def test_criterion_6_reflectionless_battery(record_acceptance):
    seq = borg_sequence(HALF.theta0, HALF.theta1, np.eye(1))
    good = reflectionless_check(seq, HALF, n=512, r=R, tol=0.05, ks=(0, 3))
    bad_seq = seq.with_sites({0: seq.alpha(0) - 0.3})
    bad = reflectionless_check(bad_seq, HALF, n=512, r=R, tol=0.05, ks=(0, 3))
    worst_bad = max(d['xi_max'] for d in bad.per_k.values())
    ok = good.ok and not bad.ok and worst_bad > 0.05
    record_acceptance(6, 'reflectionless battery', ok,
                      'Borg pair %.1e xi %.1e; perturbed xi %.2f'
                      % (max(d['pair_max'] for d in good.per_k.values()),
                         max(d['xi_max'] for d in good.per_k.values()), worst_bad))
    assert good.ok
    assert not bad.ok and worst_bad > 0.05


def test_criterion_7_resolvent_formula(rng, record_acceptance):
    seq = eventually_free(rng, 2)
    pairs = [tuple(int(x) for x in rng.integers(-12, 13, size=2)) for _ in range(18)]
    pairs += [(3, 3), (2, 2)]

    def first_branch(k, kp):
        return k < kp or (k == kp and k % 2 == 1)

    branches = {first_branch(k, kp) for k, kp in pairs}
    worst = 0.0
    for z in (0.5, 0.3 + 0.3j):
        for chk in resolvent_formula_check(seq, z, pairs, 0):
            worst = max(worst, chk.deviation)
    ok = worst < 1e-8 and branches == {True, False}
    record_acceptance(7, 'resolvent formula', ok,
                      'max deviation %.1e over %d pairs' % (worst, len(pairs)))
    assert branches == {True, False}
    assert worst < 1e-8


def test_criterion_8_plumbing(rng, record_acceptance):
    res = {}
    # Cayley round trips on evaluators and on raw values
    cay = 0.0
    for m in (1, 2, 3):
        F = random_poisson(rng, m)
        z = disk_points(rng, 200)
        Fz = F(z)
        back = schur_to_cayley(cayley_to_schur(F))(z)
        cay = max(cay, np.max(np.abs(back - Fz)) / max(1.0, np.max(np.abs(Fz))))
        vals = inverse_cayley_values(cayley_values(Fz))
        cay = max(cay, np.max(np.abs(vals - Fz)) / max(1.0, np.max(np.abs(Fz))))
    res['cayley'] = (cay, 1e-12)
    # Theta-block and truncation unitarity
    uni = 0.0
    for m in (1, 2, 3):
        seq = eventually_free(rng, m, max_norm=0.95)
        for k in range(-20, 20):
            T = theta_block(seq, k).block
            uni = max(uni, np.linalg.norm(T.conj().T @ T - np.eye(2 * m), 2))
        U = build_centered(seq, 0, 64, random_unitary(m, rng)).dense()
        uni = max(uni, np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))
    res['unitarity'] = (uni, 1e-10)
    # intertwining of rho and rho-tilde with alpha
    inter = 0.0
    for _ in range(200):
        m = int(rng.integers(1, 6))
        a = random_contraction(m, rng, 0.95)
        r, rt = rho_pair(a)
        inter = max(inter, np.linalg.norm(rt @ a - a @ r, 2),
                    np.linalg.norm(a.conj().T @ rt - r @ a.conj().T, 2))
    res['intertwining'] = (inter, 1e-11)
    # spectral-measure moment identity
    mom = 0.0
    for m in (1, 2):
        t = build_centered(eventually_free(rng, m), 0, 64)
        sd = spectral_measure(t, 0)
        for p in range(1, 7):
            mom = max(mom, np.linalg.norm(sd.moment(p) - diagonal_moment(t, 0, p), 2))
    res['moments'] = (mom, 1e-10)
    # Riccati residuals along computed chains
    ric = 0.0
    for seq in (borg_sequence(0.4, 3.0, random_unitary(2, rng)), eventually_free(rng, 2)):
        for side in ('plus', 'minus'):
            ric = max(ric, float(np.max(riccati_chain(seq, 0.6 + 0.3j, 0, 60, side)[2])))
    res['riccati'] = (ric, 1e-10)
    # seed independence at depth 200 for |z| <= 0.9
    zs = 0.9 * np.exp(1j * np.linspace(0.1, 6.1, 9))
    seed = 0.0
    for seq in (borg_sequence(0.4, 3.0, random_unitary(2, rng)), eventually_free(rng, 2)):
        seeds = [random_contraction(2, rng, 0.99) for _ in range(2)]
        for f in (schur_plus, schur_minus):
            a, b = (f(seq, zs, 0, depth=200, seed=x, certify=False) for x in seeds)
            seed = max(seed, float(np.max(operator_norm(a - b))))
    res['seed'] = (seed, 1e-10)
    # exterior symmetry of reflected Schur functions
    ext = 0.0
    for m in (1, 2):
        F = random_poisson(rng, m)
        Phi = cayley_to_schur(F)
        outer = cayley_to_schur(CaratheodoryEval(lambda w, F=F: reflect(F, w), m, 'ext'))
        for z in 2 * np.exp(1j * rng.uniform(0, 2 * np.pi, 20)):
            inside = Phi(1 / np.conj(z))
            ext = max(ext, np.linalg.norm(outer(z) - np.linalg.inv(inside.conj().T), 2))
    res['exterior'] = (ext, 1e-9)
    ok = all(v < tol for v, tol in res.values())
    record_acceptance(8, 'analytic plumbing', ok,
                      ', '.join('%s %.1e' % (k, v) for k, (v, _) in res.items()))
    failed = {k: v for k, v in res.items() if not v[0] < v[1]}
    assert not failed, failed


def test_criterion_9_unitary_equivalence(rng, record_acceptance):
    worst = 0.0
    for m in (1, 2, 3):
        for seq in (eventually_free(rng, m),
                    borg_sequence(0.7, 4.0, random_unitary(m, rng))):
            g1, g2 = random_unitary(m, rng), random_unitary(m, rng)
            worst = max(worst, equivalence_check(seq, g1, g2, N=128,
                                                 boundary=random_unitary(m, rng)))
    ok = worst < 1e-10
    record_acceptance(9, 'unitary equivalence', ok, 'max angle gap %.1e' % worst)
    assert ok
