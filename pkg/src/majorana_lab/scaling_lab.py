"""Scaling-algebra harness for the free Majorana field.

A scaled element is a recipe ``lam -> F_lam``: a polynomial template whose
factors are base test functions together with lifted symmetry data.  At
scale lam each factor ``f`` becomes ``u(A, lam a) N(lam) f_lam``, optionally
smoothed by a Gaussian mollifier acting through ``alpha_{lam x}``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermite

from .one_particle import (
    DoubleCone, GaussianPolynomial, QuasifreeModel, TestFunction, combine,
    inner, inner_result, majorana_witness, multiply_momentum, poincare_act, scale,
    shell_forms, witness_spinor,
)
from .quadrature import NonConvergence, spherical_rule
from .quasifree_car import (
    Expectation, FieldMonomial, FieldPolynomial, gns_norm_result,
    vacuum_expectation_result,
)
from .spinor_core import ZERO, FourVector, SLTwoC, covering_map, energy_projections

__all__ = [
    "ScaledFactor", "ScaledElement", "DeltaSequence", "FlowReport", "DeficitCell",
    "PreservanceReport", "ExtrapolationUnstable",
    "scaled_field", "instantiate", "lift_translate", "lift_gauge", "lift_boost", "smooth",
    "state_at", "limit_flow", "richardson", "continuity_modulus", "containment_deficit",
    "containment_deficit_slow", "preservance_report", "witness_element",
    "scaled_identity", "instantiate_factor", "state_at_result",
    "SeparationTooSmall", "ClusterRow", "ClusterTable", "cluster_bound_check",
    "translated_two_point", "fit_leading_power",
]


class ExtrapolationUnstable(ArithmeticError):
    pass


# ---------------------------------------------------------------- delta sequences

@dataclass(frozen=True)
class DeltaSequence:
    """L1-normalized Gaussians on R^4 with widths ``w_nu = base * ratio^nu``."""

    base: float = 1.0
    ratio: float = 0.5
    dim: int = 4

    def __post_init__(self):
        if not (self.base > 0 and 0 < self.ratio < 1):
            raise ValueError("need base > 0 and 0 < ratio < 1")

    def width(self, nu: int) -> float:
        return self.base * self.ratio ** nu

    def density(self, nu: int, x: np.ndarray) -> np.ndarray:
        w = self.width(nu)
        x = np.asarray(x, dtype=float)
        return (2 * np.pi * w * w) ** (-self.dim / 2) * np.exp(-0.5 * np.sum(x * x, axis=-1) / (w * w))

    def multiplier(self, nu: int, q: np.ndarray) -> np.ndarray:
        """``int h_nu(x) exp(i q.x) dx`` (Euclidean square, so the sign pattern is irrelevant)."""
        w = self.width(nu)
        return np.exp(-0.5 * w * w * np.sum(np.asarray(q) ** 2, axis=-1))

    def effective_radius(self, nu: int, eps: float = 1e-10) -> float:
        """Radius outside which h_nu carries L1 mass below eps (4D: e^{-r^2/2}(1 + r^2/2))."""
        if self.dim != 4:
            raise NotImplementedError("effective radius is tabulated for dim 4 only")
        r = brentq(lambda r: math.exp(-r * r / 2) * (1 + r * r / 2) - eps, 1e-6, 50.0)
        return r * self.width(nu)


# ---------------------------------------------------------------- scaled elements

@dataclass(frozen=True)
class ScaledFactor:
    """One ``B(.)`` slot of a scaled element.

    ``normalize``: target ``<f_lam, f_lam>_m`` imposed per lam.
    ``null_shift``: momentum shift ``k = (s/lam)(1, 0, 0, 1)`` of the base
    transform (a lam-dependent plane-wave phase, the sabotage control).
    ``smoothing``: (DeltaSequence, nu) mollifier acting through alpha_{lam x}.
    """

    base: TestFunction
    A: SLTwoC = SLTwoC.identity()
    a: FourVector = ZERO
    normalize: float | None = None
    null_shift: float = 0.0
    smoothing: tuple[DeltaSequence, int] | None = None


@dataclass(frozen=True)
class ScaledElement:
    terms: tuple[tuple[complex, tuple[ScaledFactor, ...]], ...]

    @property
    def field_linear(self) -> bool:
        return all(len(fs) == 1 for _, fs in self.terms)

    def map_factors(self, fn) -> "ScaledElement":
        return ScaledElement(tuple((c, tuple(fn(f) for f in fs)) for c, fs in self.terms))

    def __add__(self, other: "ScaledElement") -> "ScaledElement":
        return ScaledElement(self.terms + other.terms)

    def __mul__(self, other) -> "ScaledElement":
        if isinstance(other, (int, float, complex)):
            return ScaledElement(tuple((c * other, fs) for c, fs in self.terms))
        return ScaledElement(tuple((c * d, fs + gs) for c, fs in self.terms for d, gs in other.terms))

    __rmul__ = __mul__

    def __sub__(self, other: "ScaledElement") -> "ScaledElement":
        return self + other * -1

    def factors(self) -> list[ScaledFactor]:
        seen, out = set(), []
        for _, fs in self.terms:
            for f in fs:
                if id(f) not in seen:
                    seen.add(id(f))
                    out.append(f)
        return out


def scaled_field(f: TestFunction | ScaledFactor, **kw) -> ScaledElement:
    """The family ``lam -> psi(f_lam)``."""
    sf = f if isinstance(f, ScaledFactor) else ScaledFactor(f, **kw)
    return ScaledElement(((1.0 + 0j, (sf,)),))


def scaled_identity() -> ScaledElement:
    return ScaledElement(((1.0 + 0j, ()),))


def witness_element(radius: float = 1.0, center: FourVector = ZERO, sabotage: str = "none") -> ScaledElement:
    """``psi(f_lam)`` for the Gamma-real Gaussian witness, normalized to norm^2 = 2 per lam."""
    f = GaussianPolynomial(radius / 4, witness_spinor(), center, label="witness")
    shift = 1.0 if sabotage == "phase" else 0.0
    if sabotage not in ("none", "phase"):
        raise ValueError(f"unknown sabotage {sabotage!r}")
    return scaled_field(f, normalize=2.0, null_shift=shift)


def lift_translate(a: FourVector, E: ScaledElement) -> ScaledElement:
    """``(alpha_a F)_lam = alpha_{lam a}(F_lam)``."""
    if not np.any(a.to_array()):
        return E
    return E.map_factors(lambda f: replace(f, a=f.a + a))


def lift_boost(A: SLTwoC, E: ScaledElement) -> ScaledElement:
    """Lorentz transformations commute with dilations: ``u(A) u(B, b) = u(AB, Lambda(A) b)``."""
    L = covering_map(A)
    return E.map_factors(lambda f: replace(f, A=A @ f.A, a=FourVector.from_array(L @ f.a.to_array())))


def lift_gauge(E: ScaledElement) -> ScaledElement:
    return ScaledElement(tuple((c * (-1) ** len(fs), fs) for c, fs in E.terms))


def smooth(seq: DeltaSequence, nu: int, E: ScaledElement) -> ScaledElement:
    """``(alpha_h F)_lam = int h(x) alpha_{lam x}(F_lam) dx``.

    Field-linear elements take the fast path: the mollifier becomes the
    momentum multiplier ``H(lam p)`` on each factor.  Products are expanded
    over a tensor Gauss-Hermite rule in x (see ``instantiate``).
    """
    if E.field_linear:
        return E.map_factors(lambda f: replace(f, smoothing=(seq, nu)))
    return _SmoothedProduct(E.terms, seq, nu)


@dataclass(frozen=True)
class _SmoothedProduct(ScaledElement):
    seq: DeltaSequence = dc_field(default_factory=DeltaSequence)
    nu: int = 0
    nodes: int = 3


# ---------------------------------------------------------------- instantiation

_NORM_CACHE: dict = {}


def _normalization(f: TestFunction, target: float, model: QuasifreeModel, key) -> float:
    k = (key, model)
    if k not in _NORM_CACHE:
        n2 = inner(f, f, model).real
        if n2 <= 0:
            raise ArithmeticError("cannot normalize a function with zero norm")
        _NORM_CACHE[k] = math.sqrt(target / n2)
    return _NORM_CACHE[k]


def instantiate_factor(sf: ScaledFactor, lam: float, model: QuasifreeModel) -> TestFunction:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    g = scale(sf.base, lam)
    if sf.null_shift:
        k = sf.null_shift / lam ** 2
        g = multiply_momentum(g, lambda p: np.ones(len(p)), "shift", shift=[k, 0.0, 0.0, k])
    if sf.normalize is not None:
        c = _normalization(g, sf.normalize, model, (id(sf.base), sf.null_shift, lam, sf.normalize))
        g = combine([(c, g)])
    if sf.smoothing is not None:
        seq, nu = sf.smoothing
        g = multiply_momentum(g, lambda p, seq=seq, nu=nu: seq.multiplier(nu, lam * p), f"h{nu}",
                              support_growth=lam * seq.effective_radius(nu))
    if not (np.allclose(sf.A.matrix(), np.eye(2)) and not np.any(sf.a.to_array())):
        g = poincare_act(sf.A, sf.a * lam, g)
    return g


def instantiate(E: ScaledElement, lam: float, model: QuasifreeModel) -> FieldPolynomial:
    """``F_lam`` as a field polynomial; equal factors map to the same test function."""
    memo: dict[int, TestFunction] = {}

    def inst(sf: ScaledFactor) -> TestFunction:
        if id(sf) not in memo:
            memo[id(sf)] = instantiate_factor(sf, lam, model)
        return memo[id(sf)]

    terms = tuple(FieldMonomial(complex(c), tuple(inst(f) for f in fs)) for c, fs in E.terms)
    X = FieldPolynomial(terms)
    if isinstance(E, _SmoothedProduct):
        # alpha_h F_lam ~ sum_k w_k alpha_{lam x_k} F_lam on a Gauss-Hermite grid
        from .quasifree_car import translate as translate_poly
        x, w = roots_hermite(E.nodes)
        width = E.seq.width(E.nu)
        x, w = x * math.sqrt(2) * width, w / math.sqrt(math.pi)
        grid = np.stack(np.meshgrid(x, x, x, x, indexing="ij"), axis=-1).reshape(-1, 4)
        wts = np.prod(np.stack(np.meshgrid(w, w, w, w, indexing="ij"), axis=-1).reshape(-1, 4), axis=1)
        out = FieldPolynomial()
        for xk, wk in zip(grid, wts):
            out = out + wk * translate_poly(FourVector.from_array(lam * xk), X)
        return out
    return X


def state_at(lam: float, E: ScaledElement, model: QuasifreeModel) -> complex:
    return vacuum_expectation_result(instantiate(E, lam, model), model).value


def state_at_result(lam: float, E: ScaledElement, model: QuasifreeModel) -> Expectation:
    return vacuum_expectation_result(instantiate(E, lam, model), model)


# ---------------------------------------------------------------- limit flows

@dataclass
class FlowReport:
    grid: list[float]
    values: list[complex]
    errors: list[float]
    extrapolated_limit: complex
    extrapolation_error: float
    fitted_power: float | None
    monotone: bool
    note: str = "numerical limit along an explicit decreasing lambda grid (free model: unique limit)"


def richardson(grid: Sequence[float], values: Sequence[complex]) -> tuple[complex, float | None]:
    """Extrapolate ``v(lam) = L + c lam^p`` from the last three points, p fitted."""
    l1, l2, l3 = grid[-3:]
    v1, v2, v3 = values[-3:]
    d1, d2 = v1 - v2, v2 - v3
    if abs(d2) == 0 or abs(d1) == 0:
        return complex(v3), None
    ratio = abs(d1) / abs(d2)

    def eq(p):
        return (l1 ** p - l2 ** p) / (l2 ** p - l3 ** p) - ratio

    lo, hi = 1e-3, 8.0
    if eq(lo) * eq(hi) > 0:
        return complex(v3), None
    p = brentq(eq, lo, hi)
    return complex(v3 - d2 * l3 ** p / (l2 ** p - l3 ** p)), p


def limit_flow(E: ScaledElement, grid: Sequence[float], model: QuasifreeModel,
               values: Sequence[complex] | None = None) -> FlowReport:
    grid = [float(x) for x in grid]
    if len(grid) < 4:
        raise ValueError("limit_flow needs at least 4 grid points")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly decreasing")
    if values is None:
        res = [state_at_result(l, E, model) for l in grid]
        values = [r.value for r in res]
        errors = [r.error for r in res]
    else:
        errors = [0.0] * len(values)
    noise = 4 * max(errors) + 1e-14 * max(1.0, max(abs(v) for v in values))
    diffs = [abs(a - b) for a, b in zip(values, values[1:])]
    monotone = all(b <= a + noise for a, b in zip(diffs, diffs[1:]))
    if diffs[-1] <= noise:
        # converged at working precision
        L = complex(values[-1])
        return FlowReport(grid, list(values), errors, L, diffs[-1] + noise, None, monotone)
    L, p = richardson(grid, values)
    L_prev, _ = richardson(grid[:-1], values[:-1])
    if diffs[-1] > 2 * diffs[-2] + noise:
        raise ExtrapolationUnstable(f"successive differences grow: {diffs[-2]:.3e} -> {diffs[-1]:.3e}")
    err = abs(L - L_prev) + noise
    return FlowReport(grid, list(values), errors, L, err, p, monotone)


# ---------------------------------------------------------------- continuity

def continuity_modulus(E: ScaledElement, s: tuple[SLTwoC, FourVector], grid: Sequence[float],
                       model: QuasifreeModel) -> tuple[float, bool]:
    """``max_lam 2 ||u(A, lam a) f_lam - f_lam||_m`` over the factors of E.

    Returns (modulus, flagged); flagged is True when E is not field-linear and
    the per-factor triangle bound (times the number of factors) is reported.
    """
    A, a = s
    worst = 0.0
    for sf in E.factors():
        for lam in grid:
            g = instantiate_factor(sf, lam, model)
            h = poincare_act(A, a * lam, g)
            if h is g:
                continue
            n2 = inner(combine([(1.0, h), (-1.0, g)]), combine([(1.0, h), (-1.0, g)]), model).real
            worst = max(worst, 2 * math.sqrt(max(n2, 0.0)))
    k = max((len(fs) for _, fs in E.terms), default=0)
    flagged = not E.field_linear
    return (worst * max(k, 1), flagged)


# ---------------------------------------------------------------- containment deficit

@dataclass(frozen=True)
class DeficitCell:
    nu: int
    lam: float
    delta_plus: float    # ||(h*psi - psi) Omega||
    delta_minus: float   # ||(h*psi - psi)* Omega||
    error: float
    support_ok: bool

    @property
    def delta(self) -> float:
        return self.delta_plus + self.delta_minus


def _single_factor(E: ScaledElement) -> tuple[complex, ScaledFactor]:
    if len(E.terms) != 1 or len(E.terms[0][1]) != 1:
        raise ValueError("containment deficit needs a single-field family c psi(f)")
    c, (sf,) = E.terms[0]
    return c, sf


def containment_deficit(E: ScaledElement, seq: DeltaSequence, nu: int, lam: float,
                        model: QuasifreeModel, outer: DoubleCone | None = None) -> DeficitCell:
    """Delta(nu, lam) for ``E = c psi(f)`` via the one-particle fast path.

    With ``d = (H(lam p) - 1) f_lam`` one has ``||B(d) Omega||^2 = <d, P_+ d>``
    and ``||B(d)* Omega||^2 = <d, P_- d>``.
    """
    c, sf = _single_factor(E)
    g = instantiate_factor(replace(sf, smoothing=None), lam, model)
    if not np.allclose(sf.A.matrix(), np.eye(2)) or np.any(sf.a.to_array()):
        raise ValueError("apply symmetries after measuring the deficit")
    w = seq.width(nu)
    d = multiply_momentum(g, lambda p: np.expm1(-0.5 * w * w * lam * lam * np.sum(p * p, axis=1)),
                          f"dh{nu}")
    r = shell_forms(d, d, model)
    vp, vm = max(r["+"].value.real, 0.0), max(r["-"].value.real, 0.0)
    ep, em = r["+"].total_error, r["-"].total_error
    dp, dm = abs(c) * math.sqrt(vp), abs(c) * math.sqrt(vm)
    err = abs(c) * (ep / (2 * math.sqrt(vp)) if vp > ep else math.sqrt(ep)) \
        + abs(c) * (em / (2 * math.sqrt(vm)) if vm > em else math.sqrt(em))
    support_ok = True
    if outer is not None:
        grown = g.support.widened(lam * seq.effective_radius(nu))
        support_ok = outer.scaled(lam).contains(grown)
    return DeficitCell(nu, lam, dp, dm, err, support_ok)


def containment_deficit_slow(E: ScaledElement, seq: DeltaSequence, nu: int, lam: float,
                             model: QuasifreeModel, panels: int = 24, angular_order: int = 24,
                             hermite_nodes: int = 14) -> tuple[float, float]:
    """Independent route to (delta_plus, delta_minus) through position space.

    ``||(alpha_h psi - psi) Omega||^2 = int (h*h~)(a) K(a) da - 2 Re int h(a) K(a) da + K(0)``
    with ``K(a) = <f_lam, P u(lam a) f_lam>_m``.  K is tabulated as a sum of
    plane waves over a fixed spherical momentum grid (at mass lam m, base
    function) and the x-integrals use a tensor Gauss-Hermite rule, since h
    and h*h~ are Gaussians of widths w and sqrt(2) w.
    """
    c, sf = _single_factor(E)
    base = instantiate_factor(replace(sf, smoothing=None), lam, model)
    mu = model.m * lam
    # K computed on the base function at mass lam*m (the scaling identity)
    g = scale(base, 1.0 / lam)
    R = g.window_radius + float(np.linalg.norm(g.window_center))
    pts, wts = spherical_rule(R, panels, angular_order)
    om = np.sqrt(np.sum(pts * pts, axis=1) + mu * mu)
    Pp, Pm = energy_projections(pts, mu)
    out = []
    for sgn, P in ((1.0, Pp), (-1.0, Pm)):
        p4 = np.concatenate([sgn * om[:, None], pts], axis=1)
        fv = g._hat(p4)
        W = wts * np.einsum("ni,nij,nj->n", np.conj(fv), P, fv)
        pcov = p4 * np.array([1.0, -1.0, -1.0, -1.0])

        def K_avg(width: float) -> complex:
            x, w = roots_hermite(hermite_nodes)
            x, w = x * math.sqrt(2) * width, w / math.sqrt(math.pi)
            # separable: the 4D Gaussian average of exp(i p.a) is a product of 1D sums
            phase = np.ones(len(pcov), dtype=complex)
            for mu_ in range(4):
                phase = phase * (np.exp(1j * np.outer(pcov[:, mu_], x)) @ w)
            return complex(W @ phase)

        wid = seq.width(nu)
        val = K_avg(math.sqrt(2) * wid).real - 2 * K_avg(wid).real + W.sum().real
        out.append(abs(c) * math.sqrt(max(val, 0.0)))
    return out[0], out[1]


# ---------------------------------------------------------------- preservance

@dataclass
class PreservanceReport:
    verdict: str
    cells: list[DeficitCell]
    failed_cells: list[tuple[int, float, str]]
    multiplet: dict[float, float]
    criteria: dict[str, bool]
    tolerances: dict[str, float]
    grid: dict[str, list]

    def table(self, nu: int | None = None) -> dict[tuple[int, float], float]:
        return {(c.nu, c.lam): c.delta for c in self.cells if nu is None or c.nu == nu}

    def to_dict(self) -> dict:
        return {
            "criterion": "asymptotic containment of the scaled Majorana multiplet",
            "verdict": self.verdict,
            "grid": self.grid,
            "deficits": [{"nu": c.nu, "lambda": c.lam, "delta": c.delta, "delta_plus": c.delta_plus,
                          "delta_minus": c.delta_minus, "error": c.error, "support_ok": c.support_ok}
                         for c in self.cells],
            "failed_cells": [list(x) for x in self.failed_cells],
            "multiplet": {repr(k): v for k, v in self.multiplet.items()},
            "criteria": self.criteria,
            "tolerances": self.tolerances,
        }


def preservance_report(inner_region: DoubleCone, outer_region: DoubleCone, seq: DeltaSequence,
                       lam_grid: Sequence[float], model: QuasifreeModel,
                       nus: Iterable[int] = range(1, 9), sabotage: str = "none",
                       family: ScaledElement | None = None,
                       deficit_tol: float = 1e-2, multiplet_tol: float = 3e-6,
                       small_lambda: float = 0.01) -> PreservanceReport:
    """Run the deficit grid for the witness of ``inner_region`` and decide PASS/FAIL.

    PASS needs: Delta(nu_max, lam) < deficit_tol for lam <= small_lambda,
    Delta decreasing over the last three nu for every lam, the multiplet
    relation ``||(psi(f_lam)^2 - 1) Omega|| < multiplet_tol`` for every lam,
    and the smoothed support inside ``outer_region`` at nu_max.
    """
    if not outer_region.contains(DoubleCone(inner_region.center, inner_region.radius * (1 + 1e-9))):
        raise ValueError("inner region must lie strictly inside the outer region")
    lam_grid = [float(x) for x in lam_grid]
    nus = sorted(nus)
    if len(lam_grid) < 1 or len(nus) < 3:
        raise ValueError("need at least one lambda and three nu values")
    if family is None:
        family = witness_element(inner_region.radius, inner_region.center, sabotage)
    zero_family = not family.terms or all(c == 0 for c, _ in family.terms)
    cells, failed = [], []
    multiplet: dict[float, float] = {}
    for lam in lam_grid:
        if zero_family:
            multiplet[lam] = 0.0
            cells += [DeficitCell(nu, lam, 0.0, 0.0, 0.0, True) for nu in nus]
            continue
        try:
            X = instantiate(family, lam, model)
            multiplet[lam] = gns_norm_result(X * X - 1, model).value.real
        except NonConvergence as exc:
            failed.append((-1, lam, str(exc)))
            multiplet[lam] = math.nan
        for nu in nus:
            try:
                cells.append(containment_deficit(family, seq, nu, lam, model, outer_region))
            except NonConvergence as exc:
                failed.append((nu, lam, str(exc)))
    total = len(lam_grid) * (len(nus) + 1)
    by = {(c.nu, c.lam): c for c in cells}
    nu_max = nus[-1]
    small = [l for l in lam_grid if l <= small_lambda] or [min(lam_grid)]
    crit = {
        "deficit_small_at_nu_max": all((nu_max, l) in by and by[(nu_max, l)].delta < deficit_tol for l in small),
        "monotone_last_three": all(
            all((n, l) in by for n in nus[-3:])
            and all(by[(b, l)].delta <= by[(a, l)].delta + 2 * (by[(a, l)].error + by[(b, l)].error) + 1e-15
                    for a, b in zip(nus[-3:], nus[-2:]))
            for l in lam_grid),
        "multiplet_relation": all(v < multiplet_tol for v in multiplet.values()),
        "support_inside_outer": all(by[(nu_max, l)].support_ok for l in lam_grid if (nu_max, l) in by),
    }
    if len(failed) > 0.1 * total:
        verdict = "INDETERMINATE"
    else:
        verdict = "PASS" if all(crit.values()) else "FAIL"
    return PreservanceReport(
        verdict, cells, failed, multiplet, crit,
        {"deficit": deficit_tol, "multiplet": multiplet_tol, "small_lambda": small_lambda},
        {"lambda": lam_grid, "nu": nus, "widths": [seq.width(n) for n in nus]},
    )


# ---------------------------------------------------------------- clustering

class SeparationTooSmall(ValueError):
    pass


def _isotropic(f: TestFunction) -> tuple[float, np.ndarray]:
    if not (isinstance(f, GaussianPolynomial) and f.degree == 0 and not np.any(f.center.to_array())):
        raise ValueError("clustering study needs centred constant-spinor Gaussians")
    return f.sigma, f.coeffs[(0, 0, 0, 0)]


def translated_two_point(f: TestFunction, g: TestFunction, d: float, m: float,
                         rel_tol: float = 1e-11) -> tuple[complex, float]:
    """``omega(B(f) B(u(x) g))`` for ``x = (0, 0, 0, d)`` by angular reduction.

    For centred isotropic Gaussians the angular integrals are spherical Bessel
    functions, leaving
    ``2 pi int p^2 G(p) [(a.b + (m/w) a.g0 b) j0(pd) + i (p/w) a.alpha_z b j1(pd)] dp``
    with ``a = i gamma^2 conj(u_f)``, ``b = u_g``.  The oscillatory parts use
    QUADPACK's Fourier-weighted rule.
    """
    from scipy.integrate import IntegrationWarning, quad
    from .spinor_core import C_MATRIX, gamma_table

    sf, u = _isotropic(f)
    sg, v = _isotropic(g)
    gam = gamma_table()
    a = C_MATRIX @ np.conj(u)
    ab = complex(np.vdot(a, v))
    a0b = complex(np.vdot(a, gam[0] @ v))
    azb = complex(np.vdot(a, gam[0] @ gam[3] @ v))
    s = 0.5 * (sf ** 2 + sg ** 2)
    pref = 2 * np.pi * sf ** 4 * sg ** 4

    def G(p):
        return np.exp(-s * (2 * p * p + m * m))

    P = math.sqrt((40.0 + s * m * m) / (2 * s)) if s > 0 else 50.0
    omega = lambda p: math.sqrt(p * p + m * m) if (p or m) else 1.0
    err = 0.0

    def integ(fn, weight=None):
        nonlocal err
        # deep in the decaying tail QUADPACK warns about roundoff; its error
        # estimate is kept and propagated instead
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            if d == 0 or weight is None:
                v_, e_ = quad(fn, 0, P, epsabs=0, epsrel=rel_tol, limit=500)
            else:
                v_, e_ = quad(fn, 0, P, weight=weight, wvar=d, epsabs=1e-300, epsrel=rel_tol, limit=500)
        err += abs(e_)
        return v_

    if d == 0:
        I0 = integ(lambda p: p * p * G(p))
        Im = integ(lambda p: p * p * G(p) * m / omega(p))
        val = ab * I0 + a0b * Im
    else:
        # p^2 j0(pd) = p sin(pd)/d ; p^2 j1(pd) = sin(pd)/d^2 - p cos(pd)/d
        I0 = integ(lambda p: p * G(p) / d, "sin")
        Im = integ(lambda p: p * G(p) * m / omega(p) / d, "sin") if m else 0.0
        J = integ(lambda p: G(p) * p / omega(p) / d ** 2, "sin") - integ(lambda p: G(p) * p * p / omega(p) / d, "cos")
        val = ab * I0 + a0b * Im + 1j * azb * J
    scale_ = abs(ab) + abs(a0b) + abs(azb)
    return pref * val, pref * err * max(scale_, 1.0)


@dataclass
class ClusterRow:
    x: float
    lhs: float
    lhs_error: float
    envelope: float
    bound: float
    holds: bool


@dataclass
class ClusterTable:
    rows: list[ClusterRow]
    c_fit: float
    decay_exponent: float
    r: float
    mass: float
    flags: list[str]


def _time_derivative(f: TestFunction) -> TestFunction:
    # f -> d/dx0 f acts as -i p0 on the transform
    return multiply_momentum(f, lambda p: -1j * p[:, 0], "d0", bound=1.0)


def cluster_bound_check(F1: tuple[TestFunction, TestFunction] | None,
                        F2: tuple[TestFunction, TestFunction] | None,
                        x_list: Sequence[float], model: QuasifreeModel) -> ClusterTable:
    """Truncated correlation of even bilinears ``F = psi(f) psi(g)`` versus the
    spacelike clustering envelope ``c r^3 / |x|^2 (||F1|| ||d0 F2|| + ||d0 F1|| ||F2||)``.

    ``None`` stands for the identity.  Operator norms are replaced by the CAR
    envelope ``2^k prod ||f_i||`` (an upper bound) and d0 acts on the test
    functions; c is fitted at the smallest separation and then checked at the
    others.  Separations are along the z axis.
    """
    m = model.m
    flags = ["operator norms replaced by 2^k prod ||f_i|| (upper bound)",
             "d0 realized on test functions (momentum multiplication by -i p0)"]
    funcs = [f for F in (F1, F2) if F is not None for f in F]
    r = max((4 * _isotropic(f)[0] for f in funcs), default=1.0)
    xs = [float(x) for x in x_list]
    if any(x <= 3 * r for x in xs):
        raise SeparationTooSmall(f"need |x| > 3r = {3 * r}")
    if F1 is None or F2 is None:
        rows = [ClusterRow(x, 0.0, 0.0, math.nan, 0.0, True) for x in xs]
        return ClusterTable(rows, 0.0, math.inf, r, m, flags + ["identity factor: lhs vanishes"])

    def env(F):
        return 4 * math.prod(math.sqrt(max(inner(f, f, model).real, 0.0)) for f in F)

    def env_d0(F):
        f, g = F
        nf, ng = (math.sqrt(max(inner(h, h, model).real, 0.0)) for h in F)
        df, dg = (math.sqrt(max(inner(_time_derivative(h), _time_derivative(h), model).real, 0.0)) for h in F)
        return 4 * (df * ng + nf * dg)

    norm_part = env(F1) * env_d0(F2) + env_d0(F1) * env(F2)
    (f1, g1), (f2, g2) = F1, F2
    rows: list[ClusterRow] = []
    raw = []
    for x in xs:
        # omega(F1 alpha_x F2) - omega(F1) omega(F2) = -w13 w24 + w14 w23
        w13, e13 = translated_two_point(f1, f2, x, m)
        w24, e24 = translated_two_point(g1, g2, x, m)
        w14, e14 = translated_two_point(f1, g2, x, m)
        w23, e23 = translated_two_point(g1, f2, x, m)
        lhs = abs(-w13 * w24 + w14 * w23)
        err = (e13 * abs(w24) + e24 * abs(w13) + e14 * abs(w23) + e23 * abs(w14)
               + 1e-15 * (abs(w13 * w24) + abs(w14 * w23)))
        raw.append((x, lhs, err))
    base = [r ** 3 / x ** 2 * norm_part for x in xs]
    # values below their error are only known up to that error
    eff = [max(l, e) for _, l, e in raw]
    c = eff[0] / base[0] if base[0] > 0 else 0.0
    for (x, l, e), b in zip(raw, base):
        rows.append(ClusterRow(x, l, e, b, c * b, l <= c * b * (1 + 1e-12) + e))
    lx = np.log(xs)
    ly = np.log(np.maximum(eff, 1e-300))
    slope = float(np.polyfit(lx, ly, 1)[0]) if len(xs) >= 2 else math.nan
    if any(l < e for _, l, e in raw):
        flags.append("some lhs values below quadrature error; error used (exponent is a lower bound)")
    return ClusterTable(rows, c, -slope, r, m, flags)


def fit_leading_power(ts: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Fit ``log M = a + k log t + b t^2`` and return (k, R^2).

    The squared one-particle modulus is even and analytic in t, so
    ``M(t) = t^k (c0 + c2 t^2 + ...)``; the t^2 term absorbs the saturation
    of ``|exp(i p.a) - 1|`` at the larger t.
    """
    t = np.asarray(ts, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    X = np.stack([np.ones_like(t), np.log(t), t * t], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(coef[1]), r2
