"""Adaptive quadrature for momentum-space integrals.

``integrate_r3`` works in spherical coordinates: Gauss-Kronrod (7/15) panels
in the radius, Clenshaw-Curtis in cos(theta) and the trapezoid rule in phi.
Both angular rules are nested, so the half grid gives a free angular error
estimate.  The ``1/|p|`` weight is folded into the radial Jacobian.

``integrate_rn`` is an adaptive tensor Gauss-Kronrod rule on boxes, n <= 4.

Integrands are vectorized: they receive points of shape (N, dim) and return
values of shape (N,) or (N, k).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadraturePolicy", "IntegrationResult", "NonConvergence", "InvalidPolicy",
    "integrate_r3", "integrate_rn", "spherical_rule", "tail_bound",
]


class NonConvergence(RuntimeError):
    pass


class InvalidPolicy(ValueError):
    pass


@dataclass(frozen=True)
class QuadraturePolicy:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    radial_cutoff: float | None = None
    max_subdivisions: int = 400
    angular_order: int = 16
    max_angular_order: int = 512

    def validate(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidPolicy("tolerances must be positive")
        if self.radial_cutoff is not None and not self.radial_cutoff > 0:
            raise InvalidPolicy("radial_cutoff must be positive")
        if self.max_subdivisions < 1:
            raise InvalidPolicy("max_subdivisions must be >= 1")
        if self.angular_order < 2:
            raise InvalidPolicy("angular_order must be >= 2")

    def with_(self, **kw) -> "QuadraturePolicy":
        return replace(self, **kw)


@dataclass(frozen=True)
class IntegrationResult:
    value: complex | np.ndarray
    error_estimate: float
    evaluations: int
    truncation_bound: float = 0.0

    def __add__(self, other: "IntegrationResult") -> "IntegrationResult":
        return IntegrationResult(
            self.value + other.value,
            self.error_estimate + other.error_estimate,
            self.evaluations + other.evaluations,
            self.truncation_bound + other.truncation_bound,
        )

    @property
    def total_error(self) -> float:
        return self.error_estimate + self.truncation_bound


# Gauss-Kronrod 7/15 on [-1, 1] (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])


def _gk_rule():
    x = np.concatenate([-_XGK[:-1], _XGK[::-1]])
    wk = np.concatenate([_WGK[:-1], _WGK[::-1]])
    wg = np.zeros(15)
    # Gauss nodes sit at odd positions of _XGK
    gauss_idx = [1, 3, 5, 7]
    for k, i in enumerate(gauss_idx):
        wg[i] = _WG[k]
        wg[14 - i] = _WG[k]
    return x, wk, wg


_GK_X, _GK_WK, _GK_WG = _gk_rule()

# Gauss-Kronrod 3/7, used for the tensor rules in 3 and 4 dimensions
_GK7_X = np.array([-0.960491268708020283423507092629080, -0.774596669241483377035853079956480,
                   -0.434243749346802558002071502844628, 0.0,
                   0.434243749346802558002071502844628, 0.774596669241483377035853079956480,
                   0.960491268708020283423507092629080])
_GK7_WK = np.array([0.104656226026467265193823857192073, 0.268488089868333440728569280666710,
                    0.401397414775962222905051818618432, 0.450916538658474142345110087045571,
                    0.401397414775962222905051818618432, 0.268488089868333440728569280666710,
                    0.104656226026467265193823857192073])
_GK7_WG = np.array([0.0, 5 / 9, 0.0, 8 / 9, 0.0, 5 / 9, 0.0])


@lru_cache(maxsize=64)
def _clenshaw_curtis(n: int):
    """Nodes/weights on [-1, 1] with n intervals (n even, n + 1 nodes)."""
    j = np.arange(n + 1)
    theta = j * np.pi / n
    x = np.cos(theta)
    w = np.zeros(n + 1)
    for i in range(n + 1):
        s = 0.0
        for k in range(1, n // 2 + 1):
            b = 1.0 if 2 * k == n else 2.0
            s += b / (4 * k * k - 1) * np.cos(2 * k * theta[i])
        c = 1.0 if i in (0, n) else 2.0
        w[i] = c / n * (1 - s)
    return x, w


@lru_cache(maxsize=64)
def _angular_grid(n: int):
    """Unit vectors and weights (full grid, half grid mask/weights)."""
    if n % 4:
        n += 4 - n % 4
    ct, wt = _clenshaw_curtis(n)
    ct2, wt2 = _clenshaw_curtis(n // 2)
    nphi = 2 * n
    phi = 2 * np.pi * np.arange(nphi) / nphi
    st = np.sqrt(np.clip(1 - ct ** 2, 0, None))
    dirs = np.stack([
        np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
        np.outer(ct, np.ones(nphi)),
    ], axis=-1).reshape(-1, 3)
    w = np.outer(wt, np.full(nphi, 2 * np.pi / nphi)).reshape(-1)
    whalf = np.zeros((n + 1, nphi))
    whalf[::2, ::2] = np.outer(wt2, np.full(nphi // 2, 4 * np.pi / nphi))
    return dirs, w, whalf.reshape(-1)


def tail_bound(envelope: tuple[float, float] | None, R: float, weight: str) -> float:
    """Bound on int_{|p|>R} C (1+|p|^2)^-n w(p) d^3p."""
    if envelope is None:
        return 0.0
    C, n = envelope
    if weight == "plain":
        if 2 * n <= 3:
            return math.inf
        return 4 * math.pi * C * R ** (3 - 2 * n) / (2 * n - 3)
    if 2 * n <= 2:
        return math.inf
    return 4 * math.pi * C * R ** (2 - 2 * n) / (2 * n - 2)


def spherical_rule(cutoff: float, panels: int, angular_order: int,
                   weight: str = "plain", origin=None):
    """Fixed product rule (points, weights) over the ball of radius ``cutoff``."""
    dirs, wa, _ = _angular_grid(angular_order)
    edges = np.linspace(0, cutoff, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (a + b) + 0.5 * (b - a) * _GK_X).reshape(-1)
    wr = (0.5 * (b - a) * _GK_WK).reshape(-1)
    jac = r ** 2 if weight == "plain" else r
    pts = r[:, None, None] * dirs[None, :, :]
    if origin is not None:
        pts = pts + np.asarray(origin, dtype=float)
    wts = (wr * jac)[:, None] * wa[None, :]
    return pts.reshape(-1, 3), wts.reshape(-1)


def _check_weight(weight: str, origin) -> None:
    if weight not in ("plain", "inverse_abs_p"):
        raise InvalidPolicy(f"unknown weight {weight!r}")
    if weight == "inverse_abs_p" and origin is not None and np.any(np.asarray(origin) != 0):
        raise InvalidPolicy("inverse_abs_p weight requires the origin at p = 0")


def integrate_r3(integrand: Callable[[np.ndarray], np.ndarray], weight: str = "plain",
                 policy: QuadraturePolicy | None = None, *, origin=None,
                 envelope: tuple[float, float] | None = None,
                 initial_panels: int = 8, chunk: int = 400_000) -> IntegrationResult:
    """Integrate ``w(p) * integrand(p)`` over the ball ``|p - origin| <= cutoff``.

    ``envelope = (C, n)`` declares ``|integrand| <= C (1+|p|^2)^-n`` beyond
    the cutoff and yields ``truncation_bound``.
    """
    policy = policy or QuadraturePolicy()
    policy.validate()
    _check_weight(weight, origin)
    R = policy.radial_cutoff
    if R is None:
        raise InvalidPolicy("integrate_r3 needs a radial_cutoff")
    org = None if origin is None else np.asarray(origin, dtype=float)

    order = policy.angular_order
    nevals = 0
    while True:
        dirs, wa, wh = _angular_grid(order)
        nang = len(wa)

        def panel_values(a: np.ndarray, b: np.ndarray):
            nonlocal nevals
            r = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GK_X
            rf = r.reshape(-1)
            pts = rf[:, None, None] * dirs[None]
            if org is not None:
                pts = pts + org
            pts = pts.reshape(-1, 3)
            vals = []
            step = max(1, chunk // nang) * nang
            for s in range(0, len(pts), step):
                vals.append(np.asarray(integrand(pts[s:s + step])))
            v = np.concatenate(vals, axis=0).reshape((len(rf), nang) + vals[0].shape[1:])
            nevals += len(pts)
            jac = rf ** 2 if weight == "plain" else rf
            extra = (slice(None),) + (None,) * (v.ndim - 2)
            full = np.tensordot(wa, np.moveaxis(v, 1, 0), axes=1) * jac[extra]
            half = np.tensordot(wh, np.moveaxis(v, 1, 0), axes=1) * jac[extra]
            full = full.reshape((len(a), 15) + full.shape[1:])
            half = half.reshape((len(a), 15) + half.shape[1:])
            hw = 0.5 * (b - a)
            ex = (slice(None),) + (None,) * (full.ndim - 2)
            k = np.einsum("pn...,n->p...", full, _GK_WK)
            g = np.einsum("pn...,n->p...", full, _GK_WG)
            kh = np.einsum("pn...,n->p...", half, _GK_WK)
            k = k * hw[ex]
            g = g * hw[ex]
            kh = kh * hw[ex]
            err = np.abs(k - g).reshape(len(a), -1).max(axis=1)
            return k, kh, err

        edges = np.linspace(0.0, R, initial_panels + 1)
        a, b = edges[:-1], edges[1:]
        k, kh, err = panel_values(a, b)
        panels = [(a[i], b[i], k[i], kh[i], err[i]) for i in range(len(a))]
        converged = False
        while True:
            total = sum(p[2] for p in panels)
            total_half = sum(p[3] for p in panels)
            rad_err = float(sum(p[4] for p in panels))
            ang_err = float(np.max(np.abs(total - total_half)))
            target = max(policy.abs_tol, policy.rel_tol * float(np.max(np.abs(total))))
            if rad_err <= 0.5 * target:
                converged = True
                break
            if len(panels) >= policy.max_subdivisions:
                break
            # bisect every panel carrying more than its share of the error
            share = 0.5 * target / len(panels)
            panels.sort(key=lambda p: -p[4])
            nsplit = max(1, sum(1 for p in panels if p[4] > share))
            nsplit = min(nsplit, policy.max_subdivisions - len(panels))
            split, keep = panels[:nsplit], panels[nsplit:]
            sa = np.array([p[0] for p in split])
            sb = np.array([p[1] for p in split])
            mid = 0.5 * (sa + sb)
            na = np.concatenate([sa, mid])
            nb = np.concatenate([mid, sb])
            k, kh, err = panel_values(na, nb)
            panels = keep + [(na[i], nb[i], k[i], kh[i], err[i]) for i in range(len(na))]
        if not converged:
            raise NonConvergence(
                f"radial error {rad_err:.3g} > target {target:.3g} after {len(panels)} panels")
        if ang_err <= 0.5 * target:
            break
        if order * 2 > policy.max_angular_order:
            raise NonConvergence(
                f"angular error {ang_err:.3g} > target {target:.3g} at order {order}")
        order *= 2

    value = total if np.ndim(total) else complex(total)
    return IntegrationResult(value, rad_err + ang_err, nevals,
                             tail_bound(envelope, R, weight))


def integrate_rn(integrand: Callable[[np.ndarray], np.ndarray], n: int,
                 box: Sequence[tuple[float, float]],
                 policy: QuadraturePolicy | None = None, *,
                 low_order: bool = False) -> IntegrationResult:
    """Adaptive tensor Gauss-Kronrod over a finite box in R^n, n in 1..4.

    Cells use the 7/15 rule per axis (``low_order`` selects 3/7 in 4D) and
    are bisected along the axis with the largest one-axis error indicator.
    """
    policy = policy or QuadraturePolicy()
    policy.validate()
    if n not in (1, 2, 3, 4):
        raise InvalidPolicy("n must be 1..4")
    box = np.asarray(box, dtype=float)
    if box.shape != (n, 2) or not np.all(np.isfinite(box)) or np.any(box[:, 1] <= box[:, 0]):
        raise InvalidPolicy("box must be n finite (lo, hi) pairs with lo < hi")

    x1, wk1, wg1 = (_GK_X, _GK_WK, _GK_WG) if n <= 3 or not low_order else (_GK7_X, _GK7_WK, _GK7_WG)
    grids = np.meshgrid(*([x1] * n), indexing="ij")
    unit = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wk = np.ones(1)
    wg = np.ones(1)
    for _ in range(n):
        wk = np.outer(wk, wk1).reshape(-1)
        wg = np.outer(wg, wg1).reshape(-1)
    nevals = 0
    m = len(x1)

    def cell(lo: np.ndarray, hi: np.ndarray):
        nonlocal nevals
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = c + h * unit
        v = np.asarray(integrand(pts))
        nevals += len(pts)
        vol = float(np.prod(h))
        k = np.tensordot(wk, v, axes=1) * vol
        g = np.tensordot(wg, v, axes=1) * vol
        # per-axis indicator: Kronrod everywhere except Gauss-minus-Kronrod on one axis
        vt = v.reshape((m,) * n + v.shape[1:])
        axis_err = []
        for ax in range(n):
            t = vt
            for other in range(n - 1, -1, -1):
                wv = (wg1 - wk1) if other == ax else wk1
                t = np.tensordot(t, wv, axes=([other], [0]))
            axis_err.append(float(np.max(np.abs(t))))
        # QUADPACK-style rescaling of the raw Kronrod-Gauss difference
        raw = float(np.max(np.abs(k - g)))
        mean = np.tensordot(wk, v, axes=1) / 2 ** n
        resasc = float(np.max(np.abs(np.tensordot(wk, np.abs(v - mean), axes=1)))) * vol
        est = raw if resasc == 0 else resasc * min(1.0, (200 * raw / resasc) ** 1.5)
        return k, max(est, 50 * np.finfo(float).eps * resasc), int(np.argmax(axis_err))

    k0, e0, ax0 = cell(box[:, 0], box[:, 1])
    heap = [(-e0, 0, box[:, 0], box[:, 1], k0, ax0)]
    counter = 1
    total, err = k0, e0
    while True:
        target = max(policy.abs_tol, policy.rel_tol * float(np.max(np.abs(total))))
        if err <= target:
            break
        if len(heap) >= policy.max_subdivisions:
            raise NonConvergence(f"error {err:.3g} > target {target:.3g} after {len(heap)} cells")
        negerr, _, lo, hi, kv, ax = heapq.heappop(heap)
        mid = 0.5 * (lo[ax] + hi[ax])
        hi1, lo2 = hi.copy(), lo.copy()
        hi1[ax] = mid
        lo2[ax] = mid
        k1, e1, a1 = cell(lo, hi1)
        k2, e2, a2 = cell(lo2, hi)
        total = total - kv + k1 + k2
        err = err + negerr + e1 + e2
        heapq.heappush(heap, (-e1, counter, lo, hi1, k1, a1))
        heapq.heappush(heap, (-e2, counter + 1, lo2, hi, k2, a2))
        counter += 2
    # recompute from leaves to avoid drift from incremental updates
    total = sum(item[4] for item in heap)
    err = float(sum(-item[0] for item in heap))
    value = total if np.ndim(total) else complex(total)
    return IntegrationResult(value, err, nevals, 0.0)
