import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from majorana_lab.spinor_core import (
    C_MATRIX, ETA, PAULI, ZERO, FourVector, MomentumOnShell, OnShellSingularity, SLTwoC,
    boost_x_matrix, boost_z, charge_conjugate, covering_map, energy_projection,
    energy_projections, gamma, gamma_table, small_boost_violation, small_boost_witness,
    minkowski_square, rotation_sl2, sample_small_boosts, slash, spin_rep,
)

seeds = st.integers(0, 2 ** 32 - 1)


def test_chiral_gammas_explicit():
    I, Z = np.eye(2), np.zeros((2, 2))
    np.testing.assert_array_equal(gamma(0), np.block([[Z, I], [I, Z]]))
    for j in (1, 2, 3):
        s = PAULI[j - 1]
        np.testing.assert_array_equal(gamma(j), np.block([[Z, s], [-s, Z]]))
    np.testing.assert_array_equal(ETA, np.diag([1.0, -1, -1, -1]))


def test_gamma_table_is_read_only_copy():
    g = gamma_table()
    g[0] = 0
    assert np.any(gamma(0))


def test_clifford_exact():
    g = gamma_table()
    for a in range(4):
        for b in range(4):
            np.testing.assert_array_equal(g[a] @ g[b] + g[b] @ g[a], 2 * ETA[a, b] * np.eye(4))


def test_charge_conjugation_matrix():
    np.testing.assert_array_equal(C_MATRIX, 1j * gamma(2))
    # the witness spinor (1, 0, 0, 1) is self-conjugate
    np.testing.assert_allclose(charge_conjugate(np.array([1, 0, 0, 1])), [1, 0, 0, 1])
    u = np.array([1 + 2j, -0.5j, 3, 0.25])
    np.testing.assert_allclose(charge_conjugate(charge_conjugate(u)), u)


def test_fourvector_arithmetic():
    a, b = FourVector(1, 2, 3, 4), FourVector(0.5, 0, -1, 2)
    assert a + b == FourVector(1.5, 2, 2, 6)
    assert 2 * a - b == FourVector(1.5, 4, 7, 6)
    assert minkowski_square(a) == 1 - 4 - 9 - 16
    np.testing.assert_array_equal(a.spatial, [2, 3, 4])
    assert ZERO.to_array().tolist() == [0, 0, 0, 0]


def test_covering_map_identity_and_boost():
    np.testing.assert_allclose(covering_map(SLTwoC.identity()), np.eye(4), atol=1e-15)
    s = 0.7
    L = covering_map(boost_z(s))
    # diag(e^{s/2}, e^{-s/2}) is the z-boost of rapidity -s in this convention
    assert L[0, 0] == pytest.approx(math.cosh(s))
    assert L[0, 3] == pytest.approx(-math.sinh(s))
    assert L[1, 1] == pytest.approx(1.0)


def test_covering_map_rotation():
    th = 0.3
    L = covering_map(rotation_sl2([0, 0, 1], th))
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    np.testing.assert_allclose(L[1:3, 1:3], R, atol=1e-14)
    assert L[0, 0] == pytest.approx(1.0)
    # 2 pi rotation is -1 in SL(2, C) and the identity in the Lorentz group
    A = rotation_sl2([1, 1, 0], 2 * math.pi)
    np.testing.assert_allclose(A.matrix(), -np.eye(2), atol=1e-14)
    np.testing.assert_allclose(covering_map(A), np.eye(4), atol=1e-14)


def test_sltwoc_validation():
    with pytest.raises(ValueError):
        SLTwoC.from_matrix([[1, 1], [1, 1]])
    # determinant drift is removed by dividing by sqrt(det)
    assert SLTwoC.from_matrix([[2, 0], [0, 1]]).det() == pytest.approx(1.0, abs=1e-15)
    A = SLTwoC.from_matrix([[1, 2j], [0, 1]])
    assert A.det() == 1
    np.testing.assert_allclose((A @ A.inverse()).matrix(), np.eye(2))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_covering_is_homomorphism_onto_orthochronous(seed):
    rng = np.random.default_rng(seed)
    A, B = SLTwoC.random(rng, 0.5), SLTwoC.random(rng, 0.5)
    LA, LB = covering_map(A), covering_map(B)
    scale = max(1.0, np.abs(LA).max() * np.abs(LB).max())
    np.testing.assert_allclose(covering_map(A @ B), LA @ LB, atol=1e-12 * scale)
    np.testing.assert_allclose(LA.T @ ETA @ LA, ETA, atol=1e-12 * np.abs(LA).max() ** 2)
    assert LA[0, 0] >= 1.0
    assert np.linalg.det(LA) == pytest.approx(1.0, abs=1e-9 * scale ** 2)
    np.testing.assert_array_equal(covering_map(-A), LA)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_spin_rep_intertwines_slash(seed):
    rng = np.random.default_rng(seed)
    A = SLTwoC.random(rng, 0.5)
    v = rng.normal(size=4)
    S = spin_rep(A)
    lhs = S @ slash(v) @ np.linalg.inv(S)
    np.testing.assert_allclose(lhs, slash(covering_map(A) @ v), atol=1e-10 * (1 + np.abs(lhs).max()))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4))
def test_slash_squares_to_minkowski_norm(v):
    s = slash(np.array(v))
    np.testing.assert_allclose(s @ s, minkowski_square(np.array(v)) * np.eye(4), atol=1e-9 * (1 + np.dot(v, v)))


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.1, 1.0, 7.0]))
def test_projection_identities(seed, m):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(25, 3)) * rng.uniform(0.01, 30)
    Pp, Pm = energy_projections(p, m)
    for P in (Pp, Pm):
        np.testing.assert_allclose(P, P.conj().transpose(0, 2, 1), atol=1e-13)
        np.testing.assert_allclose(P @ P, P, atol=1e-12)
        np.testing.assert_allclose(np.trace(P, axis1=1, axis2=2), 2, atol=1e-12)
    np.testing.assert_allclose(Pp + Pm, np.broadcast_to(np.eye(4), Pp.shape), atol=1e-14)
    np.testing.assert_allclose(Pp @ Pm, 0, atol=1e-12)
    # charge conjugation exchanges the shells: C conj(P+(-p)) C^-1 = P-(p)
    Pc = np.einsum("ij,njk,kl->nil", C_MATRIX, energy_projections(-p, m)[0].conj(), np.linalg.inv(C_MATRIX))
    np.testing.assert_allclose(Pc, Pm, atol=1e-12)


def test_projection_matches_slash_form():
    p = MomentumOnShell((0.3, -1.2, 0.5), 0.8)
    P = energy_projection(p)
    np.testing.assert_allclose(P, energy_projections(np.array([p.pvec]), 0.8)[0][0], atol=1e-14)
    q = MomentumOnShell((0.3, -1.2, 0.5), 0.8, sign=-1)
    np.testing.assert_allclose(energy_projection(q), energy_projections(np.array([q.pvec]), 0.8)[1][0], atol=1e-14)


def test_massless_projection_singular_at_origin():
    with pytest.raises(OnShellSingularity):
        energy_projections(np.zeros((1, 3)), 0.0)
    with pytest.raises(OnShellSingularity):
        energy_projection(MomentumOnShell((0.0, 0.0, 0.0), 0.0))


def test_small_boost_delta_closed_form():
    delta, _ = small_boost_witness(1.0, 10.0)
    kappa = 10 / math.sqrt(101)
    assert delta == pytest.approx(math.asinh(kappa * (math.sqrt(2) - 1) / 2), rel=1e-14)
    assert delta == pytest.approx(0.20460, abs=1e-4)


def test_small_boost_samples_and_violation():
    delta, check = small_boost_witness(1.0, 10.0)
    p, L = sample_small_boosts(1.0, 10.0, 5000, delta, np.random.default_rng(3))
    assert np.all(minkowski_square(p) >= -1e-9) and np.all(minkowski_square(p) <= 1 + 1e-9)
    assert np.all(np.linalg.norm(p[:, 1:], axis=1) > 10)
    assert np.all(check(p, L))
    pv, Lv, s = small_boost_violation(1.0, 10.0)
    assert s > delta
    np.testing.assert_allclose(Lv @ pv, [1, 0, 0, 0], atol=1e-9)
    assert not check(pv[None], Lv[None])[0]


def test_boost_x_matrix_is_lorentz():
    L = boost_x_matrix(1.3)
    np.testing.assert_allclose(L.T @ ETA @ L, ETA, atol=1e-12)
