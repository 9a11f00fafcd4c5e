import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmvborg.errors import ContractivityViolated, InvalidArc, NotUnitary
from cmvborg.linalg_core import operator_norm, random_contraction, random_unitary
from cmvborg.verblunsky import (Periodic, VerblunskySequence, borg_parameters,
                                borg_sequence, conjugate_sequence, dump_sequence,
                                free_sequence, load_sequence, rho, rho_pair, rho_tilde,
                                theta_block, validate)

S2 = np.sqrt(2) / 2


def test_rho_free():
    s = free_sequence(2)
    assert np.allclose(rho(s, 5), np.eye(2))
    assert np.allclose(rho_tilde(s, -3), np.eye(2))


def test_rho_borg_half_circle():
    s = borg_sequence(np.pi / 2, 3 * np.pi / 2, np.eye(2))
    for k in (-3, 0, 4):
        assert np.allclose(s.alpha(k), S2 * np.eye(2), atol=1e-15)
        assert np.allclose(rho(s, k), S2 * np.eye(2), atol=1e-15)
        assert np.allclose(rho_tilde(s, k), S2 * np.eye(2), atol=1e-15)


def test_rho_random_remultiplication(rng):
    for m in range(1, 7):
        a = random_contraction(m, rng, 0.99)
        r, rt = rho_pair(a)
        assert np.linalg.norm(r @ r + a.conj().T @ a - np.eye(m), 2) < 1e-12
        assert np.linalg.norm(rt @ rt + a @ a.conj().T - np.eye(m), 2) < 1e-12


def test_theta_block_examples(rng):
    T = theta_block(free_sequence(2), 0).block
    assert np.allclose(T, np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]]))
    s = VerblunskySequence(3, 0, [random_contraction(3, rng)])
    T = theta_block(s, 0).block
    assert np.linalg.norm(T.conj().T @ T - np.eye(6), 2) < 1e-12


def test_contractivity_violation_reports_site():
    s = VerblunskySequence(1, 0, [[[0.2]], [[1.0]]])
    with pytest.raises(ContractivityViolated) as exc:
        rho(s, 1)
    assert exc.value.site == 1


def test_borg_examples():
    s = borg_sequence(0, np.pi, np.eye(1))
    for k in range(-4, 5):
        assert abs(s.alpha(k)[0, 0] - (-1j) ** k * S2) < 1e-14
    s = borg_sequence(0, 2 * np.pi, random_unitary(2, np.random.default_rng(1)))
    assert np.allclose(s.alphas(-5, 5), 0, atol=1e-15)
    g, a = borg_parameters(np.pi / 2, 3 * np.pi / 2)
    assert abs(g - 1) < 1e-15 and abs(a - S2) < 1e-15


def test_borg_errors():
    with pytest.raises(InvalidArc):
        borg_sequence(1.0, 0.5, np.eye(1))
    with pytest.raises(InvalidArc):
        borg_sequence(-0.1, 1.0, np.eye(1))
    with pytest.raises(NotUnitary):
        borg_sequence(0.0, 1.0, 2 * np.eye(1))


def test_periodic_extension(rng):
    win = np.array([random_contraction(2, rng) for _ in range(3)])
    s = VerblunskySequence(2, 0, win, Periodic())
    A = s.alphas(-6, 8)
    for k in range(-6, 6):
        assert np.allclose(A[k + 6], A[k + 9])


def test_conjugate_sequence(rng):
    win = np.array([random_contraction(2, rng) for _ in range(6)])
    s = VerblunskySequence(2, -3, win)
    same = conjugate_sequence(s, np.eye(2), np.eye(2))
    assert np.allclose(same.alphas(-5, 5), s.alphas(-5, 5))
    g1, g2 = random_unitary(2, rng), random_unitary(2, rng)
    b = conjugate_sequence(s, g1, g2)
    assert np.allclose(operator_norm(b.alphas(-3, 2)), operator_norm(s.alphas(-3, 2)))
    assert np.allclose(b.alpha(0), g1 @ s.alpha(0) @ g2.conj().T)
    sc = VerblunskySequence(1, 0, [[[0.4]]])
    ph = conjugate_sequence(sc, np.exp(0.3j) * np.eye(1), np.eye(1))
    assert np.isclose(ph.alpha(0)[0, 0], 0.4 * np.exp(0.3j))


def test_validate():
    assert np.allclose(validate(free_sequence(1), -3, 3).margins, 1)
    rep = validate(borg_sequence(np.pi / 2, 3 * np.pi / 2, np.eye(2)), 0, 4)
    assert rep.ok and np.allclose(rep.margins, 1 - S2)
    bad = free_sequence(1).with_sites({0: np.eye(1)})
    rep = validate(bad, -2, 2)
    assert not rep.ok and rep.failures == [0]


def test_json_round_trip(rng, tmp_path):
    win = np.array([random_contraction(2, rng) for _ in range(4)])
    s = VerblunskySequence(2, -1, win)
    path = tmp_path / 'seq.json'
    dump_sequence(s, str(path))
    back = load_sequence(str(path))
    assert back.k_min == -1 and back.k_max == 2
    assert np.array_equal(back.alphas(-3, 4), s.alphas(-3, 4))
    d = json.loads(dump_sequence(borg_sequence(0.2, 2.0, random_unitary(2, rng))))
    b = load_sequence(json.dumps(d))
    assert b.extension.theta0 == 0.2


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_intertwining(m, seed):
    rng = np.random.default_rng(seed)
    a = random_contraction(m, rng, 0.95)
    r, rt = rho_pair(a)
    ri, rti = np.linalg.inv(r), np.linalg.inv(rt)
    ah = a.conj().T
    for p, pt in ((r, rt), (ri, rti)):
        assert np.linalg.norm(pt @ a - a @ p, 2) < 1e-11
        assert np.linalg.norm(ah @ pt - p @ ah, 2) < 1e-11
