"""Invariant suites run by ``majorana-lab verify``.

Each suite returns ``(passed, worst_deviation, detail)``.  Suites that
depend on the gamma matrices take the table as an argument so a corrupted
table can be injected to exercise the failure path.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .one_particle import (
    GaussianPolynomial, QuasifreeModel, gamma_involution, inner, poincare_act, scale,
)
from .quasifree_car import (
    FiniteModeModel, FieldPolynomial, field, fock_oracle, gauge_act, pfaffian, vacuum_expectation,
)
from .spinor_core import (
    ETA, FourVector, SLTwoC, covering_map, energy_projections, small_boost_violation,
    small_boost_witness, minkowski_square, sample_small_boosts, slash, spin_rep,
)

Suite = Callable[[np.ndarray, np.random.Generator], tuple[bool, float, str]]


def _clifford(g, rng):
    dev = max(float(np.max(np.abs(g[a] @ g[b] + g[b] @ g[a] - 2 * ETA[a, b] * np.eye(4))))
              for a in range(4) for b in range(4))
    return dev == 0.0, dev, "{g^mu, g^nu} = 2 eta^{mu nu}"


def _slash_square(g, rng):
    v = rng.normal(size=(200, 4))
    s = slash(v, g)
    dev = float(np.max(np.abs(s @ s - minkowski_square(v)[:, None, None] * np.eye(4))))
    return dev < 1e-12, dev, "slash(v)^2 = v^2"


def _charge_conjugation(g, rng):
    C = 1j * g[2]
    dev = max(float(np.max(np.abs(C @ C.conj() - np.eye(4)))),
              float(np.max(np.abs(C - C.conj().T))),
              max(float(np.max(np.abs(C @ g[mu].conj() @ C.conj() + g[mu]))) for mu in range(4)))
    return dev < 1e-14, dev, "C conj(C) = 1, C hermitian, C conj(g) conj(C) = -g"


def _intertwining(g, rng):
    dev = 0.0
    for _ in range(100):
        A = SLTwoC.random(rng, 0.7)
        S = spin_rep(A)
        v = rng.normal(size=4)
        dev = max(dev, float(np.max(np.abs(S @ slash(v, g) @ np.linalg.inv(S) - slash(covering_map(A) @ v, g)))))
    return dev < 1e-10, dev, "S(A) slash(v) S(A)^-1 = slash(Lambda v)"


def _lorentz(g, rng):
    dev = 0.0
    for _ in range(100):
        L = covering_map(SLTwoC.random(rng, 0.7))
        dev = max(dev, float(np.max(np.abs(L.T @ ETA @ L - ETA))) / max(1.0, float(np.max(np.abs(L))) ** 2))
        if L[0, 0] < 1:
            return False, float("inf"), "Lambda^0_0 < 1"
    return dev < 1e-12, dev, "Lambda^T eta Lambda = eta (relative)"


def _covering_kernel(g, rng):
    dev = 0.0
    for _ in range(50):
        A = SLTwoC.random(rng, 0.7)
        dev = max(dev, float(np.max(np.abs(covering_map(A) - covering_map(-A)))))
    return dev == 0.0, dev, "Lambda(A) = Lambda(-A)"


def _spin_homomorphism(g, rng):
    dev = 0.0
    for _ in range(50):
        A, B = SLTwoC.random(rng, 0.7), SLTwoC.random(rng, 0.7)
        dev = max(dev, float(np.max(np.abs(spin_rep(A @ B) - spin_rep(A) @ spin_rep(B)))))
    return dev < 1e-12, dev, "S(AB) = S(A) S(B)"


def _projections(g, rng):
    dev = 0.0
    one = np.eye(4)
    for m in (0.0, 0.1, 1.0, 10.0):
        p = rng.normal(size=(250, 3)) * rng.uniform(0.1, 10, size=(250, 1))
        Pp, Pm = energy_projections(p, m, g)
        for P in (Pp, Pm):
            dev = max(dev, float(np.max(np.abs(P - P.conj().transpose(0, 2, 1)))),
                      float(np.max(np.abs(P @ P - P))),
                      float(np.max(np.abs(np.trace(P, axis1=1, axis2=2) - 2))))
        dev = max(dev, float(np.max(np.abs(Pp + Pm - one))), float(np.max(np.abs(Pp @ Pm))))
        # charge conjugation exchanges the shells
        Pm_from_C = np.einsum("ij,njk,kl->nil", 1j * g[2], energy_projections(-p, m, g)[0].conj(),
                              (1j * g[2]).conj())
        dev = max(dev, float(np.max(np.abs(Pm_from_C - Pm))))
    return dev < 1e-11, dev, "P hermitian, idempotent, complete, orthogonal, trace 2, C P+ C = P-"


def _gamma_antiunitary(g, rng):
    model = QuasifreeModel(1.0)
    dev = 0.0
    for _ in range(3):
        f = GaussianPolynomial(rng.uniform(0.4, 1.0), rng.normal(size=4) + 1j * rng.normal(size=4),
                               FourVector(*rng.uniform(-0.3, 0.3, 4)))
        h = GaussianPolynomial(rng.uniform(0.4, 1.0), rng.normal(size=4) + 1j * rng.normal(size=4),
                               FourVector(*rng.uniform(-0.3, 0.3, 4)))
        a = inner(gamma_involution(f), gamma_involution(h), model)
        b = inner(h, f, model)
        dev = max(dev, abs(a - b) / max(1.0, abs(b)))
    return dev < 1e-7, dev, "<Gamma f, Gamma g> = <g, f>"


def _car_sum_rule(g, rng):
    model = QuasifreeModel(1.0)
    dev = 0.0
    for _ in range(3):
        f = GaussianPolynomial(rng.uniform(0.4, 1.0), rng.normal(size=4) + 1j * rng.normal(size=4))
        h = GaussianPolynomial(rng.uniform(0.4, 1.0), rng.normal(size=4) + 1j * rng.normal(size=4),
                               FourVector(*rng.uniform(-0.3, 0.3, 4)))
        lhs = model.two_point(f, h) + model.two_point(h, f)
        rhs = inner(gamma_involution(f), h, model)
        dev = max(dev, abs(lhs - rhs))
    return dev < 1e-7, dev, "omega(B(f)B(g)) + omega(B(g)B(f)) = <Gamma f, g>"


def _pfaffian(g, rng):
    dev = 0.0
    for n in (2, 4, 6, 8):
        S = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        S = S - S.T
        d = np.linalg.det(S)
        dev = max(dev, abs(pfaffian(S) ** 2 - d) / abs(d))
    return dev < 1e-9, dev, "Pf(S)^2 = det(S)"


def _wick_fock(g, rng):
    M = FiniteModeModel(3, rng)
    dev = 0.0
    for _ in range(60):
        k = int(rng.integers(0, 7))
        X = FieldPolynomial.of(1.0)
        for _ in range(k):
            X = X * field(M.random_vector(rng))
        dev = max(dev, abs(vacuum_expectation(X, M) - fock_oracle(M, X)))
    return dev < 1e-10, dev, "Pfaffian rule = exact Fock vacuum element"


def _gauge(g, rng):
    M = FiniteModeModel(2, rng)
    fs = [M.random_vector(rng) for _ in range(3)]
    X = field(fs[0]) + field(fs[0]) * field(fs[1]) + 0.5 * field(fs[2]) * field(fs[1]) * field(fs[0]) * field(fs[2])
    dev = abs(vacuum_expectation(gauge_act(X), M) - vacuum_expectation(X, M))
    dev = max(dev, 0.0 if gauge_act(gauge_act(X)).structurally_equal(X) else 1.0)
    return dev < 1e-12, dev, "gauge invariance of omega, gauge^2 = 1"


def _mass_scaling(g, rng):
    dev = 0.0
    f = GaussianPolynomial(0.6, rng.normal(size=4) + 1j * rng.normal(size=4))
    h = GaussianPolynomial(0.8, rng.normal(size=4) + 1j * rng.normal(size=4), FourVector(0.1, 0, 0.2, 0))
    for lam in (0.3, 0.01):
        a = inner(scale(f, lam), scale(h, lam), QuasifreeModel(1.0))
        b = inner(f, h, QuasifreeModel(lam))
        dev = max(dev, abs(a - b))
    return dev < 1e-7, dev, "<f_lam, g_lam>_m = <f, g>_{lam m}"


def _poincare_unitary(g, rng):
    model = QuasifreeModel(1.0)
    f = GaussianPolynomial(0.6, rng.normal(size=4) + 1j * rng.normal(size=4))
    A = SLTwoC.random(rng, 0.2)
    a = FourVector(*rng.uniform(-0.5, 0.5, 4))
    dev = abs(inner(poincare_act(A, a, f), poincare_act(A, a, f), model) - inner(f, f, model))
    return dev < 1e-6, dev, "||u(A,a) f|| = ||f||"


def _small_boost(g, rng):
    delta, check = small_boost_witness(1.0, 10.0)
    p, L = sample_small_boosts(1.0, 10.0, 20000, delta, rng)
    bad = int(np.sum(~check(p, L)))
    pv, Lv, _ = small_boost_violation(1.0, 10.0)
    ok = bad == 0 and not bool(check(pv[None], Lv[None])[0])
    return ok, float(bad), "no violations inside |s| < delta; constructed one outside"


SUITES: dict[str, Suite] = {
    "clifford": _clifford,
    "slash_square": _slash_square,
    "charge_conjugation": _charge_conjugation,
    "intertwining": _intertwining,
    "covering_lorentz": _lorentz,
    "covering_kernel": _covering_kernel,
    "spin_homomorphism": _spin_homomorphism,
    "energy_projections": _projections,
    "gamma_antiunitary": _gamma_antiunitary,
    "car_sum_rule": _car_sum_rule,
    "pfaffian_determinant": _pfaffian,
    "wick_vs_fock": _wick_fock,
    "gauge_invariance": _gauge,
    "mass_scaling": _mass_scaling,
    "poincare_unitarity": _poincare_unitary,
    "small_boost": _small_boost,
}


def run_suites(gammas: np.ndarray, seed: int) -> list[dict]:
    out = []
    for name, fn in SUITES.items():
        rng = np.random.default_rng([seed, len(out)])
        try:
            ok, dev, detail = fn(gammas, rng)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, dev, detail = False, float("nan"), f"{type(exc).__name__}: {exc}"
        out.append({"suite": name, "passed": bool(ok), "deviation": float(dev), "detail": detail})
    return out
