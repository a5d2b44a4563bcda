import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from majorana_lab.one_particle import (
    DoubleCone, GaussianPolynomial, QuasifreeModel, SeparableBump, bump_integral, bump_profile,
    combine, eval_hat, from_text, gamma_involution, inner, inner_result, is_gamma_real,
    majorana_witness, multiply_momentum, norm, pminus_form, poincare_act, pplus_form, scale,
    to_text, translate, witness_spinor,
)
from majorana_lab.spinor_core import C_MATRIX, ZERO, FourVector, SLTwoC, gamma

M1 = QuasifreeModel(1.0)
seeds = st.integers(0, 2 ** 32 - 1)


def rand_spinor(rng):
    return rng.normal(size=4) + 1j * rng.normal(size=4)


def gaussian_inner(sf, u, sg, v, m):
    """Closed form of <f, g>_m for centred constant-spinor Gaussians."""
    s = 0.5 * (sf ** 2 + sg ** 2)
    return sf ** 4 * sg ** 4 * math.exp(-s * m * m) * (math.pi / (2 * s)) ** 1.5 * np.vdot(u, v)


def gaussian_two_point(sf, u, sg, v, m):
    """omega(B(f)B(g)) = <Gamma f, P+ g> for centred Gaussians by a radial integral."""
    s = 0.5 * (sf ** 2 + sg ** 2)
    a = C_MATRIX @ np.conj(u)
    i0 = quad(lambda p: 4 * math.pi * p * p * math.exp(-s * (2 * p * p + m * m)), 0, np.inf)[0]
    im = quad(lambda p: 4 * math.pi * p * p * math.exp(-s * (2 * p * p + m * m)) * m / math.hypot(p, m),
              0, np.inf)[0] if m else 0.0
    return 0.5 * sf ** 4 * sg ** 4 * (np.vdot(a, v) * i0 + np.vdot(a, gamma(0) @ v) * im)


def test_bump_profile_and_integral():
    assert bump_profile(0.0) == pytest.approx(math.exp(-1))
    assert bump_profile(1.0) == 0 and bump_profile(-1.5) == 0
    # frozen reference: int_{-1}^{1} exp(-1/(1-x^2)) dx
    ref = quad(lambda x: math.exp(-1 / (1 - x * x)), -1, 1, epsabs=1e-15)[0]
    assert bump_integral() == pytest.approx(0.44399381616807937, rel=1e-13)
    assert bump_integral() == pytest.approx(ref, rel=1e-12)


def test_double_cone_geometry():
    O = DoubleCone(ZERO, 1.0)
    assert O.contains(DoubleCone(FourVector(0.2, 0.1, 0, 0), 0.5))
    assert not O.contains(DoubleCone(FourVector(0.6, 0, 0, 0), 0.5))
    assert O.scaled(0.5).radius == 0.5
    assert O.spacelike_to(DoubleCone(FourVector(0, 0, 0, 2.5), 1.0))
    assert not O.spacelike_to(DoubleCone(FourVector(2.5, 0, 0, 0), 1.0))
    assert DoubleCone.from_dict(O.to_dict()) == O


def test_gaussian_norm_closed_form():
    u, v = np.array([1, 2j, 0, -1]), np.array([0.5, 1, 1j, 2])
    f, g = GaussianPolynomial(0.5, u), GaussianPolynomial(0.7, v)
    for m in (0.0, 1.0, 2.5):
        assert inner(f, g, QuasifreeModel(m)) == pytest.approx(gaussian_inner(0.5, u, 0.7, v, m), rel=1e-9)


def test_witness_norm_closed_form():
    s = 0.25
    f = GaussianPolynomial(s, witness_spinor())
    for mu in (0.0, 1.0, 3.0):
        expected = 2 * s ** 8 * math.exp(-s * s * mu * mu) * (math.pi / (2 * s * s)) ** 1.5
        assert inner(f, f, QuasifreeModel(mu)).real == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
def test_two_point_against_radial_oracle(m):
    rng = np.random.default_rng(5)
    u, v = rand_spinor(rng), rand_spinor(rng)
    f, g = GaussianPolynomial(0.6, u), GaussianPolynomial(0.4, v)
    assert QuasifreeModel(m).two_point(f, g) == pytest.approx(gaussian_two_point(0.6, u, 0.4, v, m), rel=1e-8)


def test_shell_split_sums_to_inner():
    rng = np.random.default_rng(6)
    f = GaussianPolynomial(0.5, rand_spinor(rng), FourVector(0.1, 0.2, 0, -0.3))
    g = GaussianPolynomial(0.8, rand_spinor(rng))
    assert pplus_form(f, g, M1) + pminus_form(f, g, M1) == pytest.approx(inner(f, g, M1), rel=1e-12)
    assert M1.two_point(f, g) == pytest.approx(pplus_form(gamma_involution(f), g, M1), rel=1e-12)


@settings(max_examples=6, deadline=None)
@given(seeds)
def test_inner_is_hermitian_positive(seed):
    rng = np.random.default_rng(seed)
    f = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng), FourVector(*rng.uniform(-1, 1, 4)))
    g = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng), FourVector(*rng.uniform(-1, 1, 4)))
    fg, gf = inner(f, g, M1), inner(g, f, M1)
    assert abs(fg - np.conj(gf)) <= 1e-8 * (abs(fg) + 1e-12)
    nf, ng = norm(f, M1), norm(g, M1)
    assert nf > 0 and abs(fg) <= nf * ng * (1 + 1e-9)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_gamma_is_antiunitary_involution(seed):
    rng = np.random.default_rng(seed)
    f = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng), FourVector(*rng.uniform(-0.5, 0.5, 4)))
    g = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng), FourVector(*rng.uniform(-0.5, 0.5, 4)))
    Gf, Gg = gamma_involution(f), gamma_involution(g)
    assert gamma_involution(Gf) is f
    p = rng.normal(size=(20, 4))
    # explicit double application, bypassing the parent shortcut
    np.testing.assert_allclose(np.conj(Gf._hat(-p)) @ C_MATRIX.T, f._hat(p), atol=1e-14)
    lhs, rhs = inner(Gf, Gg, M1), inner(g, f, M1)
    assert abs(lhs - rhs) <= 1e-8 * max(abs(rhs), 1e-10)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_car_sum_rule(seed):
    rng = np.random.default_rng(seed)
    f = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng), FourVector(*rng.uniform(-0.5, 0.5, 4)))
    g = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng))
    lhs = M1.two_point(f, g) + M1.two_point(g, f)
    rhs = inner(gamma_involution(f), g, M1)
    assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(rhs))


def test_two_point_positivity():
    rng = np.random.default_rng(7)
    for _ in range(5):
        f = GaussianPolynomial(rng.uniform(0.3, 1), rand_spinor(rng), FourVector(*rng.uniform(-0.5, 0.5, 4)))
        w = M1.two_point(gamma_involution(f), f)  # omega(B(f)* B(f)) = <f, P+ f>
        assert w.real >= 0 and abs(w.imag) <= 1e-10 * max(w.real, 1e-10)


@settings(max_examples=6, deadline=None)
@given(seeds)
def test_poincare_unitarity(seed):
    rng = np.random.default_rng(seed)
    f = GaussianPolynomial(0.6, rand_spinor(rng), FourVector(*rng.uniform(-0.5, 0.5, 4)))
    g = GaussianPolynomial(0.8, rand_spinor(rng))
    A, a = SLTwoC.random(rng, 0.2), FourVector(*rng.uniform(-1, 1, 4))
    lhs = inner(poincare_act(A, a, f), poincare_act(A, a, g), M1)
    rhs = inner(f, g, M1)
    assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs))


def test_translation_phase_and_group_law():
    f = GaussianPolynomial(0.5, witness_spinor())
    a, b = FourVector(0.3, 0.1, -0.2, 0.4), FourVector(-0.1, 0.5, 0.0, 0.2)
    p = np.random.default_rng(1).normal(size=(10, 4))
    pa = p[:, 0] * a.t - p[:, 1:] @ a.spatial
    np.testing.assert_allclose(translate(f, a)._hat(p), np.exp(1j * pa)[:, None] * f._hat(p), atol=1e-15)
    np.testing.assert_allclose(translate(translate(f, a), b)._hat(p), translate(f, a + b)._hat(p), atol=1e-14)
    assert translate(f, ZERO) is f
    assert translate(f, a).support.center == a


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 0.9))
def test_mass_scaling_identity(lam):
    rng = np.random.default_rng(int(lam * 1e6))
    f = GaussianPolynomial(0.5, rand_spinor(rng), FourVector(0.1, 0, 0.2, 0))
    g = GaussianPolynomial(0.7, rand_spinor(rng))
    a = inner(scale(f, lam), scale(g, lam), M1)
    b = inner(f, g, QuasifreeModel(lam))
    assert abs(a - b) <= 1e-8 * max(1.0, abs(b))


def test_scale_composes():
    f = GaussianPolynomial(0.5, witness_spinor())
    g = scale(scale(f, 0.1), 0.2)
    assert g.parent is f and g.spec["lambda"] == pytest.approx(0.02)
    assert scale(f, 1.0) is f
    with pytest.raises(ValueError):
        scale(f, 0.0)


def test_witness_is_gamma_real_and_normalized():
    for m in (1.0, 0.1):
        model = QuasifreeModel(m)
        w = majorana_witness(DoubleCone(ZERO, 1.0), model=model)
        assert is_gamma_real(w)
        assert inner(w, w, model).real == pytest.approx(2.0, abs=1e-9)
        assert w.support.radius <= 1.0
    assert not is_gamma_real(GaussianPolynomial(0.25, np.array([1, 0, 0, 0])))


def test_bump_witness_exact_support():
    w = majorana_witness(DoubleCone(FourVector(0, 0, 0, 1), 1.0), profile="bump")
    assert w.support.exact and DoubleCone(FourVector(0, 0, 0, 1), 1.0).contains(w.support)
    assert is_gamma_real(w)
    assert inner(w, w, M1).real == pytest.approx(2.0, abs=1e-6)


def test_bump_transform_matches_direct_sum():
    rng = np.random.default_rng(2)
    f = SeparableBump([0.5, 0.4, 0.6, 0.3], rand_spinor(rng), FourVector(0.1, 0, 0.2, 0))
    p = rng.normal(size=(3, 4)) * 3
    # direct 4D quadrature of the Fourier integral, one axis at a time
    direct = np.ones(3, dtype=complex)
    for mu in range(4):
        r, c = f.radii[mu], f.center.to_array()[mu]
        sgn = 1 if mu == 0 else -1
        for i in range(3):
            k = sgn * p[i, mu]
            re = quad(lambda x: bump_profile((x - c) / r) * math.cos(k * x), c - r, c + r, epsabs=1e-14)[0]
            im = quad(lambda x: bump_profile((x - c) / r) * math.sin(k * x), c - r, c + r, epsabs=1e-14)[0]
            direct[i] *= re + 1j * im
    np.testing.assert_allclose(f._hat(p), (2 * np.pi) ** -2 * direct[:, None] * f.spinor, atol=1e-12)


def test_combination_linearity():
    rng = np.random.default_rng(4)
    f = GaussianPolynomial(0.5, rand_spinor(rng))
    g = GaussianPolynomial(0.7, rand_spinor(rng), FourVector(0, 0.3, 0, 0))
    h = GaussianPolynomial(0.6, rand_spinor(rng))
    c = 0.3 - 1.2j
    lhs = inner(h, combine([(c, f), (1.0, g)]), M1)
    assert lhs == pytest.approx(c * inner(h, f, M1) + inner(h, g, M1), rel=1e-9)
    assert inner(f - f, f - f, M1) == pytest.approx(0, abs=1e-20)
    np.testing.assert_allclose(eval_hat(2 * f, np.zeros(4)), 2 * eval_hat(f, np.zeros(4)))


def test_multiply_momentum_phase_shift():
    f = GaussianPolynomial(0.5, witness_spinor())
    k = np.array([1.0, 0, 0, 1.0])
    g = multiply_momentum(f, lambda p: np.ones(len(p)), "shift", shift=k)
    p = np.random.default_rng(0).normal(size=(5, 4))
    np.testing.assert_allclose(g._hat(p), f._hat(p - k))
    np.testing.assert_allclose(g.window_center, [0, 0, 1.0])


def test_inner_result_reports_errors():
    f = GaussianPolynomial(0.5, witness_spinor())
    r = inner_result(f, f, M1)
    assert r.error_estimate < 1e-9 and r.truncation_bound < 1e-9 and r.evaluations > 0


def test_text_round_trip():
    rng = np.random.default_rng(8)
    for f in (GaussianPolynomial(0.4, {(0, 0, 0, 0): rand_spinor(rng), (1, 0, 2, 0): rand_spinor(rng)},
                                 FourVector(0.1, 0.2, 0.3, 0.4), label="poly"),
              SeparableBump([0.3, 0.2, 0.2, 0.2], rand_spinor(rng), FourVector(0, 1, 0, 0))):
        g = from_text(to_text(f))
        p = rng.normal(size=(6, 4))
        np.testing.assert_allclose(g._hat(p), f._hat(p), atol=1e-15)
        assert g.support == f.support and g.label == f.label
    base = GaussianPolynomial(0.4, witness_spinor())
    chain = gamma_involution(scale(translate(base, FourVector(0.1, 0, 0, 0.2)), 0.5)) + 2j * base
    g = from_text(to_text(chain))
    p = rng.normal(size=(6, 4))
    np.testing.assert_allclose(g._hat(p), chain._hat(p), atol=1e-15)
    # arbitrary momentum multipliers cannot be rebuilt from text
    with pytest.raises(ValueError):
        from_text(to_text(multiply_momentum(base, lambda q: q[:, 0], "d0")))


def test_invalid_constructions():
    with pytest.raises(ValueError):
        GaussianPolynomial(0.0, witness_spinor())
    with pytest.raises(ValueError):
        SeparableBump([0.1, 0, 0.1, 0.1], witness_spinor())
    with pytest.raises(ValueError):
        majorana_witness(DoubleCone(ZERO, 1.0), profile="cosine")
