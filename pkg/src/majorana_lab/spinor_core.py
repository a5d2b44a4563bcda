"""Dirac spinor algebra in the chiral representation.

Signature is (+,-,-,-) throughout.  Four-vectors are stored with
contravariant components ``(t, x, y, z)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ETA", "PAULI", "ZERO", "FourVector", "SLTwoC", "MomentumOnShell",
    "OnShellSingularity", "RadiusTooSmall",
    "gamma", "gamma_table", "slash", "charge_conjugate", "C_MATRIX",
    "spin_rep", "covering_map", "boost_z", "rotation_sl2",
    "energy_projection", "energy_projections", "minkowski_square",
    "small_boost_witness", "boost_x_matrix", "sample_small_boosts", "small_boost_violation",
]

ETA = np.diag([1.0, -1.0, -1.0, -1.0])

_I2 = np.eye(2, dtype=complex)
PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
# sigma_mu = (1, sigma) and sigma-tilde_mu = (1, -sigma)
_SIGMA = (_I2,) + PAULI
_SIGMA_TILDE = (_I2,) + tuple(-s for s in PAULI)


class OnShellSingularity(ValueError):
    """Raised for the massless on-shell point p = 0, where P(p) is undefined."""


class RadiusTooSmall(ValueError):
    pass


def _block(a, b, c, d):
    return np.block([[a, b], [c, d]])


def _build_gammas() -> np.ndarray:
    z = np.zeros((2, 2), dtype=complex)
    g = np.empty((4, 4, 4), dtype=complex)
    g[0] = _block(z, _I2, _I2, z)
    for j, s in enumerate(PAULI, start=1):
        g[j] = _block(z, s, -s, z)
    return g


_GAMMAS = _build_gammas()
_GAMMAS.setflags(write=False)


def gamma_table() -> np.ndarray:
    """Return a fresh copy of the (4, 4, 4) array of gamma matrices."""
    return _GAMMAS.copy()


def gamma(mu: int) -> np.ndarray:
    if mu not in (0, 1, 2, 3):
        raise ValueError(f"mu must be 0..3, got {mu!r}")
    return _GAMMAS[mu].copy()


@dataclass(frozen=True)
class FourVector:
    t: float
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, v) -> "FourVector":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))

    def to_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z], dtype=float)

    def __add__(self, other: "FourVector") -> "FourVector":
        return FourVector.from_array(self.to_array() + other.to_array())

    def __sub__(self, other: "FourVector") -> "FourVector":
        return FourVector.from_array(self.to_array() - other.to_array())

    def __mul__(self, s: float) -> "FourVector":
        return FourVector.from_array(s * self.to_array())

    __rmul__ = __mul__

    @property
    def spatial(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


ZERO = FourVector(0.0, 0.0, 0.0, 0.0)


def minkowski_square(v) -> float:
    v = v.to_array() if isinstance(v, FourVector) else np.asarray(v)
    return v[..., 0] ** 2 - v[..., 1] ** 2 - v[..., 2] ** 2 - v[..., 3] ** 2


def slash(v, gammas: np.ndarray | None = None) -> np.ndarray:
    """Feynman slash ``v_mu gamma^mu`` of contravariant components ``v``.

    Accepts a FourVector or an array of shape (..., 4); returns (..., 4, 4).
    """
    g = _GAMMAS if gammas is None else gammas
    v = v.to_array() if isinstance(v, FourVector) else np.asarray(v, dtype=float)
    cov = v * np.array([1.0, -1.0, -1.0, -1.0])
    return np.einsum("...m,mij->...ij", cov, g)


# C u = i gamma^2 conj(u); C_MATRIX is the linear part i*gamma^2.
C_MATRIX = 1j * _GAMMAS[2]


def charge_conjugate(u: np.ndarray) -> np.ndarray:
    """Antilinear charge conjugation on spinors of shape (..., 4)."""
    return np.einsum("ij,...j->...i", C_MATRIX, np.conj(u))


@dataclass(frozen=True)
class SLTwoC:
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_matrix(cls, m) -> "SLTwoC":
        m = np.asarray(m, dtype=complex)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if det == 0:
            raise ValueError("singular matrix is not in SL(2, C)")
        if abs(det - 1) > 1e-12:
            m = m / np.sqrt(det)
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @classmethod
    def identity(cls) -> "SLTwoC":
        return cls(1, 0, 0, 1)

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 1.0) -> "SLTwoC":
        from scipy.linalg import expm
        x = scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        x -= np.trace(x) / 2 * _I2
        return cls.from_matrix(expm(x))

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "SLTwoC") -> "SLTwoC":
        return SLTwoC.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "SLTwoC":
        return SLTwoC(self.d, -self.b, -self.c, self.a)

    def __neg__(self) -> "SLTwoC":
        return SLTwoC(-self.a, -self.b, -self.c, -self.d)


def boost_z(rapidity: float) -> SLTwoC:
    h = rapidity / 2
    return SLTwoC(np.exp(h), 0, 0, np.exp(-h))


def rotation_sl2(axis, angle: float) -> SLTwoC:
    """Element of SU(2) covering the rotation by ``angle`` about ``axis``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    ns = sum(n[k] * PAULI[k] for k in range(3))
    return SLTwoC.from_matrix(np.cos(angle / 2) * _I2 - 1j * np.sin(angle / 2) * ns)


def spin_rep(A: SLTwoC) -> np.ndarray:
    m = A.matrix()
    z = np.zeros((2, 2), dtype=complex)
    return _block(m, z, z, np.linalg.inv(m.conj().T))


def covering_map(A: SLTwoC) -> np.ndarray:
    """Lorentz matrix of A, fixed by ``S(A) slash(v) S(A)^-1 = slash(Lambda(A) v)``.

    ``Lambda^mu_nu = 1/2 tr(sigma~_mu A sigma~_nu A^dagger)``.
    """
    m = A.matrix()
    md = m.conj().T
    lam = np.empty((4, 4))
    for mu in range(4):
        for nu in range(4):
            lam[mu, nu] = 0.5 * np.trace(_SIGMA_TILDE[mu] @ m @ _SIGMA_TILDE[nu] @ md).real
    return lam


@dataclass(frozen=True)
class MomentumOnShell:
    pvec: tuple[float, float, float]
    m: float
    sign: int = 1

    def energy(self) -> float:
        return self.sign * float(np.sqrt(np.dot(self.pvec, self.pvec) + self.m ** 2))


def energy_projections(pvec: np.ndarray, m: float, gammas: np.ndarray | None = None):
    """Vectorized ``(P_+(p), P_-(p))`` for spatial momenta of shape (..., 3).

    ``P_pm = (1 pm H/omega)/2`` with ``H = gamma^0 (m - p.gamma)``, which is
    ``gamma^0 (pslash + m) / (2 p_0)`` evaluated at ``p_0 = pm omega``.
    """
    g = _GAMMAS if gammas is None else gammas
    pvec = np.asarray(pvec, dtype=float)
    w = np.sqrt(np.sum(pvec ** 2, axis=-1) + m * m)
    if np.any(w == 0):
        raise OnShellSingularity("massless projection at p = 0")
    g0gj = np.einsum("ab,jbc->jac", g[0], g[1:])
    H = m * g[0] - np.einsum("...j,jac->...ac", pvec, g0gj)
    K = H / w[..., None, None]
    one = np.eye(4)
    return 0.5 * (one + K), 0.5 * (one - K)


def energy_projection(p: MomentumOnShell, gammas: np.ndarray | None = None) -> np.ndarray:
    g = _GAMMAS if gammas is None else gammas
    pvec = np.asarray(p.pvec, dtype=float)
    p0 = p.energy()
    if p0 == 0:
        raise OnShellSingularity("massless projection at p = 0")
    four = np.concatenate([[p0], pvec])
    return g[0] @ (slash(four, g) + p.m * np.eye(4)) / (2 * p0)


def boost_x_matrix(s: float) -> np.ndarray:
    L = np.eye(4)
    L[0, 0] = L[1, 1] = np.cosh(s)
    L[0, 1] = L[1, 0] = np.sinh(s)
    return L


def small_boost_witness(m: float, R: float) -> tuple[float, Callable]:
    """Rapidity bound delta and checker for the small-boost momentum lemma.

    For ``|s| < delta`` and ``p`` forward with ``0 <= p^2 <= m^2``,
    ``|pvec| > R``, any ``Lambda = R1 Lambda_1(s) R2`` keeps
    ``|Lambda . pvec| > |pvec|/sqrt(2)``.  delta solves the sufficient
    condition ``1 - sqrt(2) sinh(delta)/kappa >= 1/sqrt(2)`` where
    ``kappa = R / sqrt(R^2 + m^2)`` bounds ``|pvec|/p_0`` from below.

    The checker takes 4-momenta ``p`` (N, 4) and Lorentz matrices ``L``
    (N, 4, 4) and returns a boolean array.
    """
    if R < 3 * m:
        raise RadiusTooSmall(f"R={R} < 3m={3 * m}")
    kappa = R / np.sqrt(R * R + m * m)
    delta = float(np.arcsinh(kappa * (np.sqrt(2) - 1) / 2))

    def check(p: np.ndarray, L: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        pp = np.einsum("...ij,...j->...i", L, p)
        return np.linalg.norm(pp[:, 1:], axis=1) > np.linalg.norm(p[:, 1:], axis=1) / np.sqrt(2)

    return delta, check


def _rotation_4x4(R3: np.ndarray) -> np.ndarray:
    n = R3.shape[0]
    out = np.zeros((n, 4, 4))
    out[:, 0, 0] = 1.0
    out[:, 1:, 1:] = R3
    return out


def sample_small_boosts(m: float, R: float, n: int, delta: float,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random admissible momenta and Lorentz matrices ``R1 Lambda_1(s) R2``, ``|s| < delta``.

    ``|pvec|`` is log-uniform on (R, 100 R); ``p^2`` is uniform on [0, m^2].
    """
    from scipy.spatial.transform import Rotation

    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = R * np.exp(rng.uniform(0, np.log(100.0), size=n)) * (1 + 1e-12)
    mu = m * np.sqrt(rng.uniform(0, 1, size=n))
    pvec = d * r[:, None]
    p = np.concatenate([np.sqrt(r * r + mu * mu)[:, None], pvec], axis=1)
    s = rng.uniform(-delta, delta, size=n)
    B = np.zeros((n, 4, 4))
    B[:, 0, 0] = B[:, 1, 1] = np.cosh(s)
    B[:, 0, 1] = B[:, 1, 0] = np.sinh(s)
    B[:, 2, 2] = B[:, 3, 3] = 1.0
    R1 = _rotation_4x4(Rotation.random(n, random_state=rng).as_matrix())
    R2 = _rotation_4x4(Rotation.random(n, random_state=rng).as_matrix())
    return p, R1 @ B @ R2


def small_boost_violation(m: float, R: float) -> tuple[np.ndarray, np.ndarray, float]:
    """A boost far outside the small-rapidity neighbourhood that brings an
    admissible momentum to rest: ``p = m (cosh s, -sinh s, 0, 0)``."""
    s = float(np.arcsinh(R / m)) + 0.5
    p = np.array([m * np.cosh(s), -m * np.sinh(s), 0.0, 0.0])
    return p, boost_x_matrix(s), s
