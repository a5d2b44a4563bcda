"""One-particle space of the free Majorana field.

Test functions are handled through their Fourier transforms with the fixed
convention ``f^(p) = (2 pi)^-2 int d^4x exp(i p.x) f(x)``, ``p.x`` the
Minkowski product.  With it translations act as ``exp(i p.a)``, Lorentz
transformations as ``S(A) f^(Lambda^-1 p)`` and Gamma as
``i gamma^2 conj(f^(-p))``.

Every test function knows a momentum window (centre, radius) outside which
its transform is negligible; quadrature cutoffs come from it.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp

from .quadrature import IntegrationResult, QuadraturePolicy, integrate_r3
from .spinor_core import (
    C_MATRIX, ZERO, FourVector, SLTwoC, covering_map, energy_projections,
    gamma_table, spin_rep,
)

__all__ = [
    "DoubleCone", "TestFunction", "GaussianPolynomial", "SeparableBump",
    "QuasifreeModel", "GridExtrapolation",
    "eval_hat", "gamma_involution", "poincare_act", "translate", "boost", "scale",
    "multiply_momentum", "combine", "inner", "inner_result", "pplus_form",
    "pminus_form", "shell_forms", "norm", "majorana_witness", "witness_spinor",
    "is_gamma_real", "to_text", "from_text", "bump_profile", "bump_integral",
]

_SIGN = np.array([1.0, -1.0, -1.0, -1.0])
# |f^| below this fraction of its peak is treated as outside the window
_WINDOW_EPS = 1e-9


class GridExtrapolation(UserWarning):
    """A cached bump transform was sampled beyond its grid."""


@dataclass(frozen=True)
class DoubleCone:
    """Position-space support descriptor: ``|x0 - c0| + |x - c| < radius``."""

    center: FourVector = ZERO
    radius: float = 1.0
    exact: bool = True

    def scaled(self, lam: float) -> "DoubleCone":
        return DoubleCone(self.center * lam, self.radius * lam, self.exact)

    def translated(self, a: FourVector) -> "DoubleCone":
        return DoubleCone(self.center + a, self.radius, self.exact)

    def widened(self, dr: float, exact: bool | None = None) -> "DoubleCone":
        return DoubleCone(self.center, self.radius + dr, self.exact if exact is None else exact)

    def contains(self, other: "DoubleCone") -> bool:
        d = other.center - self.center
        return abs(d.t) + float(np.linalg.norm(d.spatial)) + other.radius <= self.radius

    def spacelike_to(self, other: "DoubleCone") -> bool:
        """True if every point of self is spacelike to every point of other."""
        d = other.center - self.center
        # points of a double cone have |dt| <= r and |dx| <= r, with |dt| + |dx| <= r
        r = self.radius + other.radius
        return float(np.linalg.norm(d.spatial)) - abs(d.t) > r

    def to_dict(self) -> dict:
        return {"center": list(self.center.to_array()), "radius": self.radius, "exact": self.exact}

    @classmethod
    def from_dict(cls, d: dict) -> "DoubleCone":
        return cls(FourVector.from_array(d["center"]), float(d["radius"]), bool(d["exact"]))


class TestFunction:
    """Spinor-valued test function, known through its Fourier transform.

    Subclasses implement ``_hat(p)`` for p of shape (N, 4), returning (N, 4).
    Instances are immutable.
    """

    label: str = ""
    support: DoubleCone
    # momentum window: spatial centre (3,) and radius
    window_center: np.ndarray
    window_radius: float
    # |f^(p)| <= exp(logC) (1 + |pvec - window_center|^2)^-N, stored as (logC, N)
    envelope: tuple[float, float]

    def __call__(self, p) -> np.ndarray:
        return eval_hat(self, p)

    def _hat(self, p: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serializable")

    # arithmetic is pointwise in momentum space
    def __add__(self, other: "TestFunction") -> "TestFunction":
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return combine([(1.0, self), (-1.0, other)])

    def __rmul__(self, c: complex) -> "TestFunction":
        return combine([(c, self)])

    def __neg__(self) -> "TestFunction":
        return combine([(-1.0, self)])

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.label!r}>"


def eval_hat(f: TestFunction, p) -> np.ndarray:
    """Evaluate f^ at 4-momenta of shape (..., 4); returns (..., 4) complex."""
    p = p.to_array() if isinstance(p, FourVector) else np.asarray(p, dtype=float)
    shape = p.shape[:-1]
    out = f._hat(p.reshape(-1, 4))
    return out.reshape(shape + (4,))


def _minkowski(p: np.ndarray, a) -> np.ndarray:
    a = a.to_array() if isinstance(a, FourVector) else np.asarray(a, dtype=float)
    return p @ (a * _SIGN)


class GaussianPolynomial(TestFunction):
    """``f^(p) = sigma^4 exp(-sigma^2 |p|_E^2 / 2) exp(i p.c) sum_k p^k u_k``.

    ``coeffs`` maps multi-indices (k0, k1, k2, k3) to spinors.  In position
    space this is a Euclidean Gaussian of width sigma centred at c, acted on
    by a constant-coefficient differential operator.  Its support is only
    effective (4 sigma ball).
    """

    def __init__(self, sigma: float, coeffs: dict | np.ndarray,
                 center: FourVector = ZERO, label: str = "gauss"):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        if not isinstance(coeffs, dict):
            coeffs = {(0, 0, 0, 0): np.asarray(coeffs, dtype=complex)}
        self.sigma = float(sigma)
        self.center = center
        self.coeffs = {tuple(int(i) for i in k): np.asarray(v, dtype=complex).copy()
                       for k, v in coeffs.items()}
        self.label = label
        self.degree = max(sum(k) for k in self.coeffs)
        self.support = DoubleCone(center, 4 * self.sigma, exact=False)
        self.window_center = np.zeros(3)
        # envelope exp(-s^2 r^2/2) r^deg falls below _WINDOW_EPS of its size
        x = math.sqrt(2 * (math.log(1 / _WINDOW_EPS) + 2 * self.degree + 4))
        self.window_radius = (x + math.sqrt(self.degree)) / self.sigma
        self.envelope = self._envelope()

    def _envelope(self) -> tuple[float, float]:
        # pick the decay power that makes the tail beyond the window smallest
        r = np.linspace(0, 80 / self.sigma, 40001)
        coef = sum(float(np.linalg.norm(v)) for v in self.coeffs.values())
        logg = (4 * math.log(self.sigma) + math.log(coef) - 0.5 * self.sigma ** 2 * r ** 2
                + self.degree * np.log(np.maximum(1, r)))
        best = None
        for N in range(2, 21):
            logC = float(np.max(logg + N * np.log1p(r ** 2))) + 0.01
            logtail = 2 * logC + (3 - 4 * N) * math.log(self.window_radius)
            if best is None or logtail < best[0]:
                best = (logtail, logC, N)
        return best[1], best[2]

    def _hat(self, p: np.ndarray) -> np.ndarray:
        env = self.sigma ** 4 * np.exp(-0.5 * self.sigma ** 2 * np.sum(p * p, axis=1))
        env = env * np.exp(1j * _minkowski(p, self.center))
        poly = np.zeros((len(p), 4), dtype=complex)
        for k, u in self.coeffs.items():
            mono = np.prod(p ** np.array(k), axis=1)
            poly += mono[:, None] * u
        return env[:, None] * poly

    def to_dict(self) -> dict:
        return {
            "family": "GaussianPolynomial", "label": self.label, "sigma": self.sigma,
            "center": list(self.center.to_array()),
            "coeffs": [[list(k), [[z.real, z.imag] for z in v]] for k, v in self.coeffs.items()],
            "support": self.support.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianPolynomial":
        coeffs = {tuple(k): np.array([complex(a, b) for a, b in v]) for k, v in d["coeffs"]}
        return cls(d["sigma"], coeffs, FourVector.from_array(d["center"]), d.get("label", "gauss"))


def bump_profile(x):
    """Standard bump exp(-1/(1 - x^2)) on (-1, 1), zero outside."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    out = np.zeros_like(x)
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def _bump_cosine_transform(k: np.ndarray, nodes: int = 2000) -> np.ndarray:
    """``B(k) = int_{-1}^{1} b(y) cos(k y) dy`` by composite Gauss-Legendre."""
    xg, wg = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(-1, 1, nodes // 20 + 1)
    a, b = edges[:-1, None], edges[1:, None]
    y = (0.5 * (a + b) + 0.5 * (b - a) * xg).reshape(-1)
    w = (0.5 * (b - a) * wg).reshape(-1)
    by = bump_profile(y) * w
    k = np.asarray(k, dtype=float)
    out = np.empty(k.shape)
    flat = k.reshape(-1)
    res = out.reshape(-1)
    for s in range(0, len(flat), 2000):
        res[s:s + 2000] = np.cos(np.outer(flat[s:s + 2000], y)) @ by
    return out


def bump_integral() -> float:
    return float(_bump_cosine_transform(np.zeros(1), nodes=4000)[0])


class _BumpTransform:
    """Cached spline of B(k) on [0, kmax], shared read-only between bumps."""

    _cache: dict = {}

    def __init__(self, kmax: float, dk: float = 0.02):
        self.kmax = kmax
        k = np.arange(0, kmax + dk, dk)
        nodes = int(max(2000, 20 * kmax))
        nodes -= nodes % 20
        self.spline = CubicSpline(k, _bump_cosine_transform(k, nodes), bc_type=((1, 0.0), "not-a-knot"))

    @classmethod
    def get(cls, kmax: float) -> "_BumpTransform":
        kmax = float(2 ** math.ceil(math.log2(max(kmax, 16.0))))
        if kmax not in cls._cache:
            cls._cache[kmax] = cls(kmax)
        return cls._cache[kmax]

    def __call__(self, k: np.ndarray) -> np.ndarray:
        k = np.abs(k)
        out = np.empty_like(k)
        inside = k <= self.kmax
        out[inside] = self.spline(k[inside])
        if not np.all(inside):
            warnings.warn(f"bump transform sampled beyond k={self.kmax}; evaluating directly",
                          GridExtrapolation, stacklevel=3)
            out[~inside] = _bump_cosine_transform(k[~inside], int(20 * k[~inside].max()) // 20 * 20 + 2000)
        return out


class SeparableBump(TestFunction):
    """``f(x) = prod_mu b((x_mu - c_mu)/r_mu) u`` with exact box support.

    The box is contained in the double cone of radius ``r_0 + |r_spatial|``
    around c, which is recorded as the (exact, enclosing) support.
    """

    def __init__(self, radii, spinor, center: FourVector = ZERO,
                 kmax: float = 256.0, label: str = "bump"):
        self.radii = np.asarray(radii, dtype=float).reshape(4)
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        self.spinor = np.asarray(spinor, dtype=complex).reshape(4)
        self.center = center
        self.label = label
        self.kmax = float(kmax)
        self.table = _BumpTransform.get(kmax)
        self.support = DoubleCone(center, float(self.radii[0] + np.linalg.norm(self.radii[1:])), exact=True)
        self.window_center = np.zeros(3)
        # |B(k)| < 1e-6 B(0) beyond k = 135, so |f^|^2 has dropped by 1e-12 there
        self.window_radius = float(np.sqrt(3) * 135.0 / np.min(self.radii[1:]))
        self.envelope = self._envelope()

    def _envelope(self) -> tuple[float, float]:
        N = 3
        k = np.linspace(0, self.table.kmax, 20001)
        bk = np.abs(self.table(k))
        rmin = float(np.min(self.radii))
        # |p|^2 <= 3 max_j p_j^2 bounds the decay through the slowest axis
        decay = float(np.max(bk * (1 + (k / rmin) ** 2) ** N)) * 3 ** N
        B0 = float(self.table(np.zeros(1))[0])
        C = (2 * np.pi) ** -2 * float(np.prod(self.radii)) * B0 ** 3 * decay / B0
        return math.log(1.01 * C * float(np.linalg.norm(self.spinor))), N

    def _hat(self, p: np.ndarray) -> np.ndarray:
        fac = np.ones(len(p))
        for mu in range(4):
            fac = fac * self.radii[mu] * self.table(p[:, mu] * self.radii[mu])
        fac = (2 * np.pi) ** -2 * fac * np.exp(1j * _minkowski(p, self.center))
        return fac[:, None] * self.spinor

    def to_dict(self) -> dict:
        return {
            "family": "SeparableBump", "label": self.label, "radii": list(self.radii),
            "spinor": [[z.real, z.imag] for z in self.spinor],
            "center": list(self.center.to_array()), "kmax": self.kmax,
            "support": self.support.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeparableBump":
        return cls(d["radii"], [complex(a, b) for a, b in d["spinor"]],
                   FourVector.from_array(d["center"]), d.get("kmax", 256.0), d.get("label", "bump"))


class _Derived(TestFunction):
    """Test function obtained from another by a momentum-space operation."""

    def __init__(self, parent: TestFunction, op: Callable[[np.ndarray], np.ndarray],
                 spec: dict, support: DoubleCone, window_center, window_radius: float,
                 envelope: tuple[float, float], label: str):
        self.parent = parent
        self._op = op
        self.spec = spec
        self.support = support
        self.window_center = np.asarray(window_center, dtype=float)
        self.window_radius = float(window_radius)
        self.envelope = envelope
        self.label = label

    def _hat(self, p: np.ndarray) -> np.ndarray:
        return self._op(p)

    def to_dict(self) -> dict:
        return {"family": "derived", **self.spec, "of": self.parent.to_dict()}


class _Combination(TestFunction):
    def __init__(self, terms: list[tuple[complex, TestFunction]]):
        self.terms = [(complex(c), f) for c, f in terms]
        self.label = " + ".join(f"{c:.3g}*{f.label}" for c, f in self.terms)
        fs = [f for _, f in self.terms]
        lo = min(f.support.radius for f in fs)
        # enclosing double cone around the first centre
        c0 = fs[0].support.center
        rad = max(f.support.radius + abs((f.support.center - c0).t)
                  + float(np.linalg.norm((f.support.center - c0).spatial)) for f in fs)
        self.support = DoubleCone(c0, max(rad, lo), all(f.support.exact for f in fs))
        centers = np.array([f.window_center for f in fs])
        self.window_center = centers[0] if np.allclose(centers, centers[0]) else np.zeros(3)
        self.window_radius = max(f.window_radius + float(np.linalg.norm(f.window_center - self.window_center))
                                 for f in fs)
        N = min(f.envelope[1] for f in fs)
        # Peetre: (1 + |p - c|^2) >= (1 + |p - c'|^2) / (2 (1 + |c - c'|^2))
        logs = [math.log(abs(c)) + f.envelope[0]
                + N * math.log(2 * (1 + float(np.sum((f.window_center - self.window_center) ** 2))))
                * (not np.allclose(f.window_center, self.window_center))
                for c, f in self.terms if c != 0]
        self.envelope = (float(logsumexp(logs)) if logs else -math.inf, N)

    def _hat(self, p: np.ndarray) -> np.ndarray:
        out = np.zeros((len(p), 4), dtype=complex)
        for c, f in self.terms:
            out += c * f._hat(p)
        return out

    def to_dict(self) -> dict:
        return {"family": "combination",
                "terms": [[[c.real, c.imag], f.to_dict()] for c, f in self.terms]}


def combine(terms: Iterable[tuple[complex, TestFunction]]) -> TestFunction:
    return _Combination(list(terms))


def gamma_involution(f: TestFunction) -> TestFunction:
    """``(Gamma f)^(p) = i gamma^2 conj(f^(-p))``."""
    if isinstance(f, _Derived) and f.spec.get("op") == "gamma":
        return f.parent
    cached = f.__dict__.get("_gamma_image")
    if cached is not None:
        return cached

    def op(p):
        return np.conj(f._hat(-p)) @ C_MATRIX.T

    g = _Derived(f, op, {"op": "gamma"}, f.support, -f.window_center,
                 f.window_radius, f.envelope, f"G({f.label})")
    f._gamma_image = g
    return g


def translate(f: TestFunction, a: FourVector) -> TestFunction:
    return poincare_act(SLTwoC.identity(), a, f)


def boost(f: TestFunction, A: SLTwoC) -> TestFunction:
    return poincare_act(A, ZERO, f)


def poincare_act(A: SLTwoC, a: FourVector, f: TestFunction) -> TestFunction:
    """``(u(A,a)f)^(p) = exp(i p.a) S(A) f^(Lambda(A)^-1 p)``."""
    a_arr = a.to_array()
    if np.allclose(A.matrix(), np.eye(2)):
        if not np.any(a_arr):
            return f

        def op(p):
            return np.exp(1j * _minkowski(p, a_arr))[:, None] * f._hat(p)

        return _Derived(f, op, {"op": "translate", "a": list(a_arr)}, f.support.translated(a),
                        f.window_center, f.window_radius, f.envelope, f"T({f.label})")
    S = spin_rep(A)
    L = covering_map(A)
    Linv = np.linalg.inv(L)

    def op(p):
        q = p @ Linv.T
        return np.exp(1j * _minkowski(p, a_arr))[:, None] * (f._hat(q) @ S.T)

    # a boost stretches the momentum window by at most the largest singular value
    grow = float(np.linalg.norm(L, 2))
    sv = float(np.linalg.norm(S, 2))
    sup = DoubleCone(f.support.center, f.support.radius * grow, f.support.exact).translated(a)
    C, N = f.envelope
    c2 = float(np.sum(f.window_center ** 2))
    if c2:
        # recentre the envelope at p = 0 before boosting
        C += N * math.log(2 * (1 + c2))
    return _Derived(f, op, {"op": "poincare", "A": [[z.real, z.imag] for z in A.matrix().ravel()],
                            "a": list(a_arr)},
                    sup, np.zeros(3), (f.window_radius + math.sqrt(c2)) * grow,
                    (C + math.log(sv) + 2 * N * math.log(grow), N), f"U({f.label})")


def scale(f: TestFunction, lam: float) -> TestFunction:
    """``f_lam(x) = lam^(3/2 - 4) f(x/lam)``, i.e. ``f^_lam(p) = lam^(3/2) f^(lam p)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if lam == 1:
        return f
    if isinstance(f, _Derived) and f.spec.get("op") == "scale":
        return scale(f.parent, lam * f.spec["lambda"])
    c = lam ** 1.5

    def op(p):
        return c * f._hat(lam * p)

    C, N = f.envelope
    return _Derived(f, op, {"op": "scale", "lambda": lam}, f.support.scaled(lam),
                    f.window_center / lam, f.window_radius / lam,
                    (C + 1.5 * math.log(lam) + max(0.0, -2 * N * math.log(lam)), N),
                    f"({f.label})_{lam:g}")


def multiply_momentum(f: TestFunction, mult: Callable[[np.ndarray], np.ndarray],
                      tag: str, support_growth: float = 0.0, bound: float = 1.0,
                      shift=None) -> TestFunction:
    """Generic multiplier ``f^(p) -> mult(p) f^(p - shift)``.

    ``bound`` must dominate |mult|; used for smoothing, time derivatives and
    plane-wave phases (``shift`` is a 4-momentum).
    """
    sh = None if shift is None else np.asarray(shift, dtype=float)

    def op(p):
        q = p if sh is None else p - sh
        return mult(p)[:, None] * f._hat(q)

    wc = f.window_center if sh is None else f.window_center + sh[1:]
    sup = f.support.widened(support_growth, exact=False if support_growth else None)
    C, N = f.envelope
    return _Derived(f, op, {"op": tag}, sup, wc, f.window_radius,
                    (C + math.log(bound), N), f"{tag}({f.label})")


def witness_spinor() -> np.ndarray:
    """``(1 + i gamma^2) e_1``, fixed by charge conjugation."""
    e1 = np.array([1, 0, 0, 0], dtype=complex)
    return e1 + 1j * gamma_table()[2] @ e1


# ---------------------------------------------------------------- inner products

@dataclass(frozen=True)
class QuasifreeModel:
    """Mass and quadrature policy defining <.,.>_m and the vacuum two-point kernel."""

    m: float = 1.0
    policy: QuadraturePolicy = field(default_factory=QuadraturePolicy)

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("mass must be non-negative")

    def with_mass(self, m: float) -> "QuasifreeModel":
        return QuasifreeModel(m, self.policy)

    # protocol used by the quasifree calculus
    def gamma(self, f: TestFunction) -> TestFunction:
        return gamma_involution(f)

    def two_point_result(self, f: TestFunction, g: TestFunction) -> IntegrationResult:
        """omega(B(f) B(g)) = <Gamma f, P_+ g>_m."""
        return shell_forms(gamma_involution(f), g, self, shells=("+",))["+"]

    def two_point(self, f: TestFunction, g: TestFunction) -> complex:
        return self.two_point_result(f, g).value

    def inner(self, f: TestFunction, g: TestFunction) -> complex:
        return inner(f, g, self)


def _window(f: TestFunction, g: TestFunction) -> tuple[np.ndarray | None, float]:
    cf, cg = f.window_center, g.window_center
    if np.allclose(cf, 0) and np.allclose(cg, 0):
        return None, max(f.window_radius, g.window_radius)
    # integrate around the shared centre when the windows are far from p = 0
    c = 0.5 * (cf + cg)
    R = max(f.window_radius + np.linalg.norm(cf - c), g.window_radius + np.linalg.norm(cg - c))
    if np.linalg.norm(c) <= R:
        return None, float(np.linalg.norm(c) + R)
    return c, float(R)


def shell_forms(f: TestFunction, g: TestFunction, model: QuasifreeModel,
                shells: tuple[str, ...] = ("+", "-"), gammas: np.ndarray | None = None
                ) -> dict[str, IntegrationResult]:
    """``int d^3p f^(pm w, p)^dagger P_pm(p) g^(pm w, p)`` for the requested shells."""
    m = model.m
    origin, R = _window(f, g)
    pol = model.policy.with_(radial_cutoff=R if model.policy.radial_cutoff is None
                             else model.policy.radial_cutoff)
    same = f is g

    def integrand(pv):
        w = np.sqrt(np.sum(pv * pv, axis=1) + m * m)
        Pp, Pm = energy_projections(pv, m, gammas)
        cols = []
        for s in shells:
            sgn = 1.0 if s == "+" else -1.0
            p4 = np.concatenate([sgn * w[:, None], pv], axis=1)
            fv = f._hat(p4)
            gv = fv if same else g._hat(p4)
            P = Pp if s == "+" else Pm
            cols.append(np.einsum("ni,nij,nj->n", np.conj(fv), P, gv))
        return np.stack(cols, axis=1)

    res = integrate_r3(integrand, "plain", pol, origin=origin)
    # beyond the cutoff |f^ P g^| <= Cf Cg (1 + |p - o|^2)^-(Nf+Ng) (1 - d/R)^-2n,
    # d the largest offset of an envelope centre from the integration origin o
    o = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    R = pol.radial_cutoff
    d = max(float(np.linalg.norm(f.window_center - o)), float(np.linalg.norm(g.window_center - o)))
    (lf, nf), (lg, ng) = f.envelope, g.envelope
    n = nf + ng
    if d < R:
        logt = (math.log(4 * math.pi) + lf + lg + (3 - 2 * n) * math.log(R)
                - math.log(2 * n - 3) - 2 * n * math.log1p(-d / R))
        tail = math.exp(min(logt, 700.0))
    else:
        tail = math.inf
    out = {}
    for i, s in enumerate(shells):
        out[s] = IntegrationResult(complex(res.value[i]), res.error_estimate, res.evaluations, tail)
    return out


def inner_result(f: TestFunction, g: TestFunction, model: QuasifreeModel) -> IntegrationResult:
    r = shell_forms(f, g, model)
    return r["+"] + IntegrationResult(r["-"].value, r["-"].error_estimate, 0, r["-"].truncation_bound)


def inner(f: TestFunction, g: TestFunction, model: QuasifreeModel) -> complex:
    """``<f, g>_m``: antilinear in f, linear in g."""
    return inner_result(f, g, model).value


def norm(f: TestFunction, model: QuasifreeModel) -> float:
    return math.sqrt(max(inner(f, f, model).real, 0.0))


def pplus_form(f: TestFunction, g: TestFunction, model: QuasifreeModel) -> complex:
    return shell_forms(f, g, model, shells=("+",))["+"].value


def pminus_form(f: TestFunction, g: TestFunction, model: QuasifreeModel) -> complex:
    return shell_forms(f, g, model, shells=("-",))["-"].value


def is_gamma_real(f: TestFunction, rng: np.random.Generator | None = None,
                  samples: int = 100, tol: float = 1e-10) -> bool:
    rng = rng or np.random.default_rng(0)
    scale_ = max(f.window_radius / 6, 1e-12)
    p = rng.normal(size=(samples, 4)) * scale_
    p[:, 1:] += f.window_center
    a = f._hat(p)
    b = gamma_involution(f)._hat(p)
    ref = max(float(np.max(np.abs(a))), 1e-300)
    return bool(np.max(np.abs(a - b)) <= tol * max(ref, 1.0))


def majorana_witness(region: DoubleCone, profile: str = "gaussian",
                     model: QuasifreeModel | None = None, label: str = "witness") -> TestFunction:
    """Gamma-real test function ``g (1 + i gamma^2) e_1`` localized in ``region``,
    normalized to ``<f, f>_m = 2``.

    ``profile="gaussian"`` uses an isotropic Gaussian of width radius/4
    (effective support); ``"bump"`` uses a box bump inside the double cone.
    """
    model = model or QuasifreeModel()
    u = witness_spinor()
    if profile == "gaussian":
        f: TestFunction = GaussianPolynomial(region.radius / 4, u, region.center, label=label)
    elif profile == "bump":
        # box with half-widths a0 = a, a0 + sqrt(3) a < radius
        a = 0.99 * region.radius / (1 + math.sqrt(3))
        f = SeparableBump([a, a, a, a], u, region.center, label=label)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    n2 = inner(f, f, model).real
    c = math.sqrt(2.0 / n2)
    if profile == "gaussian":
        return GaussianPolynomial(f.sigma, c * u, region.center, label=label)
    return SeparableBump(f.radii, c * u, region.center, f.kmax, label=label)


# ---------------------------------------------------------------- serialization

def to_text(f: TestFunction) -> str:
    return json.dumps(f.to_dict(), sort_keys=True)


def from_text(text: str) -> TestFunction:
    return _from_dict(json.loads(text))


def _from_dict(d: dict) -> TestFunction:
    fam = d["family"]
    if fam == "GaussianPolynomial":
        return GaussianPolynomial.from_dict(d)
    if fam == "SeparableBump":
        return SeparableBump.from_dict(d)
    if fam == "combination":
        return combine([(complex(*c), _from_dict(t)) for c, t in d["terms"]])
    if fam == "derived":
        parent = _from_dict(d["of"])
        op = d["op"]
        if op == "gamma":
            return gamma_involution(parent)
        if op == "translate":
            return translate(parent, FourVector.from_array(d["a"]))
        if op == "scale":
            return scale(parent, d["lambda"])
        if op == "poincare":
            A = SLTwoC.from_matrix(np.array([complex(a, b) for a, b in d["A"]]).reshape(2, 2))
            return poincare_act(A, FourVector.from_array(d["a"]), parent)
    raise ValueError(f"cannot deserialize family {fam!r} / op {d.get('op')!r}")
