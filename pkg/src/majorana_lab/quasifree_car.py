"""Self-dual CAR algebra in the quasifree vacuum.

Field polynomials are symbolic: a monomial is a coefficient times an
ordered product ``B(f_1) ... B(f_k)``.  Expectation values are computed by
the fermionic Wick rule (Pfaffian of the pair table), never through an
operator representation, except in the small Fock-space oracle.

B is complex linear.  With ``omega(B(f) B(g)) = <Gamma f, P_+ g>`` and
``B(f)* = B(Gamma f)`` the anticommutator is ``{B(f), B(g)} = <Gamma f, g>``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import reduce
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np
from scipy.stats import ortho_group

from .one_particle import QuasifreeModel, gamma_involution, inner_result, translate as _translate_f
from .quadrature import IntegrationResult
from .spinor_core import FourVector

__all__ = [
    "FieldMonomial", "FieldPolynomial", "field", "identity", "zero",
    "adjoint", "gauge_act", "translate", "parse_prefix", "format_prefix",
    "pfaffian", "pfaffian_with_error", "vacuum_expectation", "vacuum_expectation_result",
    "gns_norm", "gns_norm_result", "two_point", "anticommutator",
    "FiniteModeModel", "fock_oracle", "fock_operators",
    "NotSkewSymmetric", "OddOrder", "MonomialTooLong", "NegativeNormBeyondTolerance",
    "TooManyModes", "Expectation",
]

MAX_FACTORS = 16


class NotSkewSymmetric(ValueError):
    pass


class OddOrder(ValueError):
    pass


class MonomialTooLong(ValueError):
    pass


class NegativeNormBeyondTolerance(ArithmeticError):
    pass


class TooManyModes(ValueError):
    pass


class PairModel(Protocol):
    def two_point_result(self, f: Any, g: Any) -> IntegrationResult: ...
    def gamma(self, f: Any) -> Any: ...


# ---------------------------------------------------------------- polynomials

@dataclass(frozen=True)
class FieldMonomial:
    coefficient: complex
    factors: tuple = ()

    @property
    def parity(self) -> int:
        return -1 if len(self.factors) % 2 else 1

    def __mul__(self, other: "FieldMonomial") -> "FieldMonomial":
        return FieldMonomial(self.coefficient * other.coefficient, self.factors + other.factors)

    def same_word(self, other: "FieldMonomial") -> bool:
        return len(self.factors) == len(other.factors) and all(
            a is b for a, b in zip(self.factors, other.factors))


@dataclass(frozen=True)
class FieldPolynomial:
    """Linear combination of monomials; no normal ordering is imposed."""

    terms: tuple[FieldMonomial, ...] = ()

    @classmethod
    def of(cls, x) -> "FieldPolynomial":
        if isinstance(x, FieldPolynomial):
            return x
        if isinstance(x, FieldMonomial):
            return cls((x,))
        if isinstance(x, (int, float, complex, np.number)):
            return cls((FieldMonomial(complex(x)),))
        raise TypeError(f"cannot convert {type(x).__name__} to FieldPolynomial")

    def __add__(self, other) -> "FieldPolynomial":
        return FieldPolynomial(self.terms + FieldPolynomial.of(other).terms)

    def __radd__(self, other) -> "FieldPolynomial":
        return FieldPolynomial.of(other) + self

    def __sub__(self, other) -> "FieldPolynomial":
        return self + (-1) * FieldPolynomial.of(other)

    def __rsub__(self, other) -> "FieldPolynomial":
        return FieldPolynomial.of(other) - self

    def __neg__(self) -> "FieldPolynomial":
        return (-1) * self

    def __mul__(self, other) -> "FieldPolynomial":
        if isinstance(other, (int, float, complex, np.number)):
            return FieldPolynomial(tuple(FieldMonomial(t.coefficient * other, t.factors)
                                         for t in self.terms))
        other = FieldPolynomial.of(other)
        return FieldPolynomial(tuple(a * b for a in self.terms for b in other.terms))

    def __rmul__(self, c) -> "FieldPolynomial":
        if isinstance(c, (int, float, complex, np.number)):
            return self * c
        return FieldPolynomial.of(c) * self

    def __pow__(self, k: int) -> "FieldPolynomial":
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        return reduce(lambda a, b: a * b, [self] * k, identity())

    def map_factors(self, fn: Callable[[Any], Any]) -> "FieldPolynomial":
        return FieldPolynomial(tuple(FieldMonomial(t.coefficient, tuple(fn(f) for f in t.factors))
                                     for t in self.terms))

    def simplified(self) -> "FieldPolynomial":
        """Merge monomials with identical factor words and drop zeros."""
        out: list[FieldMonomial] = []
        for t in self.terms:
            for i, s in enumerate(out):
                if s.same_word(t):
                    out[i] = FieldMonomial(s.coefficient + t.coefficient, s.factors)
                    break
            else:
                out.append(t)
        return FieldPolynomial(tuple(t for t in out if t.coefficient != 0))

    @property
    def max_length(self) -> int:
        return max((len(t.factors) for t in self.terms), default=0)

    def is_even(self) -> bool:
        return all(len(t.factors) % 2 == 0 for t in self.terms)

    def structurally_equal(self, other: "FieldPolynomial") -> bool:
        a, b = self.simplified().terms, other.simplified().terms
        return len(a) == len(b) and all(
            any(s.same_word(t) and abs(s.coefficient - t.coefficient) <= 1e-15 * max(1, abs(s.coefficient))
                for t in b) for s in a)


def field(f) -> FieldPolynomial:
    """The generator B(f) (psi(f) in the vacuum representation)."""
    return FieldPolynomial((FieldMonomial(1.0 + 0j, (f,)),))


def identity() -> FieldPolynomial:
    return FieldPolynomial((FieldMonomial(1.0 + 0j),))


def zero() -> FieldPolynomial:
    return FieldPolynomial()


def adjoint(X: FieldPolynomial, gamma: Callable[[Any], Any] = gamma_involution) -> FieldPolynomial:
    """``(c B(f_1)...B(f_k))* = conj(c) B(Gamma f_k)...B(Gamma f_1)``."""
    return FieldPolynomial(tuple(
        FieldMonomial(np.conj(t.coefficient), tuple(gamma(f) for f in reversed(t.factors)))
        for t in X.terms))


def gauge_act(X: FieldPolynomial) -> FieldPolynomial:
    """The Z_2 gauge automorphism ``B(f) -> -B(f)``."""
    return FieldPolynomial(tuple(FieldMonomial(t.coefficient * t.parity, t.factors) for t in X.terms))


def translate(x: FourVector, X: FieldPolynomial) -> FieldPolynomial:
    if not np.any(x.to_array()):
        return X
    return X.map_factors(lambda f: _translate_f(f, x))


# ---------------------------------------------------------------- prefix notation

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_prefix(text: str, env: Mapping[str, Any]) -> FieldPolynomial:
    """Parse ``(sum ...)``, ``(prod ...)``, ``(field name)``, ``(adj X)``,
    ``(scalar c)`` with test functions looked up by name in ``env``."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def expect(tok):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            raise ValueError(f"expected {tok!r} at token {pos}")
        pos += 1

    def node() -> FieldPolynomial:
        nonlocal pos
        expect("(")
        if pos >= len(tokens):
            raise ValueError("unexpected end of input")
        head = tokens[pos]
        pos += 1
        if head in ("sum", "prod"):
            items = []
            while pos < len(tokens) and tokens[pos] == "(":
                items.append(node())
            if not items:
                raise ValueError(f"empty {head}")
            out = reduce((lambda a, b: a + b) if head == "sum" else (lambda a, b: a * b), items)
        elif head == "field":
            name = tokens[pos]
            pos += 1
            if name not in env:
                raise KeyError(f"unknown test function {name!r}")
            out = field(env[name])
        elif head == "adj":
            out = adjoint(node())
        elif head == "scalar":
            out = complex(tokens[pos].replace("i", "j")) * identity()
            pos += 1
        else:
            raise ValueError(f"unknown node {head!r}")
        expect(")")
        return out

    X = node()
    if pos != len(tokens):
        raise ValueError("trailing tokens")
    return X


def format_prefix(X: FieldPolynomial, name: Callable[[Any], str] = lambda f: f.label) -> str:
    def c_str(c: complex) -> str:
        return repr(complex(c)).strip("()").replace("j", "i")

    def mono(t: FieldMonomial) -> str:
        parts = [f"(scalar {c_str(t.coefficient)})"] + [f"(field {name(f)})" for f in t.factors]
        return parts[0] if len(parts) == 1 else "(prod " + " ".join(parts) + ")"

    if not X.terms:
        return "(scalar 0)"
    if len(X.terms) == 1:
        return mono(X.terms[0])
    return "(sum " + " ".join(mono(t) for t in X.terms) + ")"


# ---------------------------------------------------------------- Pfaffian

def _check_skew(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSkewSymmetric("matrix must be square")
    if S.shape[0] % 2:
        raise OddOrder(f"order {S.shape[0]} is odd")
    if S.shape[0] > MAX_FACTORS:
        raise MonomialTooLong(f"order {S.shape[0]} > {MAX_FACTORS}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if np.max(np.abs(S + S.T), initial=0.0) > 1e-12 * scale:
        raise NotSkewSymmetric("S + S^T is not zero")
    return S


def _pf_recursive(A: np.ndarray, E: np.ndarray | None) -> tuple[complex, float]:
    """First-row expansion over bitmasks of remaining indices, memoized.

    ``E`` holds absolute errors of the entries; the returned error is the
    first-order propagated bound plus a rounding term ``n eps sum |products|``.
    """
    n = A.shape[0]
    memo: dict[int, tuple[complex, float, float]] = {0: (1.0 + 0j, 0.0, 1.0)}

    def pf(mask: int) -> tuple[complex, float, float]:
        if mask in memo:
            return memo[mask]
        idx = [i for i in range(n) if mask >> i & 1]
        i = idx[0]
        val, err, mag = 0j, 0.0, 0.0
        for k, j in enumerate(idx[1:]):
            sub, sub_err, sub_mag = pf(mask & ~(1 << i) & ~(1 << j))
            sign = -1.0 if k % 2 else 1.0
            val += sign * A[i, j] * sub
            mag += abs(A[i, j]) * sub_mag
            if E is not None:
                err += E[i, j] * abs(sub) + abs(A[i, j]) * sub_err
        memo[mask] = (val, err, mag)
        return val, err, mag

    val, err, mag = pf((1 << n) - 1)
    return val, err + n * np.finfo(float).eps * mag


def pfaffian(S) -> complex:
    S = _check_skew(S)
    return _pf_recursive(S, None)[0]


def pfaffian_with_error(S, E) -> tuple[complex, float]:
    S = _check_skew(S)
    return _pf_recursive(S, np.asarray(E, dtype=float))


# ---------------------------------------------------------------- expectations

@dataclass(frozen=True)
class Expectation:
    value: complex
    error: float


def _two_point_result(model, f, g) -> IntegrationResult:
    if f is None or g is None:
        return IntegrationResult(0j, 0.0, 0, 0.0)
    return model.two_point_result(f, g)


def vacuum_expectation_result(X: FieldPolynomial, model: PairModel,
                              cache: dict | None = None) -> Expectation:
    """Quasifree vacuum expectation with a propagated error bound."""
    X = FieldPolynomial.of(X)
    if X.max_length > MAX_FACTORS:
        raise MonomialTooLong(f"monomial with {X.max_length} factors > {MAX_FACTORS}")
    cache = {} if cache is None else cache
    pairs: dict[tuple[int, int], tuple[complex, float]] = {}
    keep: list = []  # keep factors alive so ids stay unique

    def w(f, g) -> tuple[complex, float]:
        key = (id(f), id(g))
        if key not in pairs:
            ck = cache.get(key)
            if ck is None:
                r = _two_point_result(model, f, g)
                ck = (complex(r.value), float(r.total_error))
                cache[key] = ck
                keep.append((f, g))
            pairs[key] = ck
        return pairs[key]

    total, err = 0j, 0.0
    for t in X.terms:
        k = len(t.factors)
        if t.coefficient == 0 or k % 2:
            continue
        if k == 0:
            total += t.coefficient
            continue
        A = np.zeros((k, k), dtype=complex)
        E = np.zeros((k, k))
        for i in range(k):
            for j in range(i + 1, k):
                v, e = w(t.factors[i], t.factors[j])
                A[i, j], A[j, i] = v, -v
                E[i, j] = E[j, i] = e
        val, e = _pf_recursive(A, E)
        total += t.coefficient * val
        err += abs(t.coefficient) * e
    cache.setdefault("_keep", []).extend(keep)
    return Expectation(total, err)


def vacuum_expectation(X: FieldPolynomial, model: PairModel) -> complex:
    return vacuum_expectation_result(X, model).value


def gns_norm_result(X: FieldPolynomial, model: PairModel,
                    cache: dict | None = None) -> Expectation:
    """``||X Omega|| = sqrt(omega(X* X))``; the error is on the norm."""
    X = FieldPolynomial.of(X)
    XX = adjoint(X, model.gamma) * X
    e = vacuum_expectation_result(XX, model, cache)
    v = e.value.real
    if v < -10 * e.error - 1e-300 and v < -1e-14:
        raise NegativeNormBeyondTolerance(f"omega(X*X) = {v:.3e} with error {e.error:.3e}")
    if v <= e.error:
        # indistinguishable from zero
        return Expectation(math.sqrt(max(v, 0.0)), math.sqrt(max(e.error, 0.0) + max(v, 0.0)))
    n = math.sqrt(v)
    return Expectation(n, e.error / (2 * n))


def gns_norm(X: FieldPolynomial, model: PairModel) -> float:
    return gns_norm_result(X, model).value.real


def two_point(f, g, model: QuasifreeModel) -> complex:
    """``omega(B(f) B(g)) = <Gamma f, P_+ g>_m``."""
    return model.two_point(f, g)


def anticommutator(f, g, model: QuasifreeModel) -> complex:
    """``{B(f), B(g)} = <Gamma f, g>_m`` (times the identity)."""
    return inner_result(gamma_involution(f), g, model).value


# ---------------------------------------------------------------- finite oracle

class FiniteModeModel:
    """Self-dual CAR over C^{2n} with Gamma = complex conjugation.

    The positive-energy projection is ``P_+ = sum_k e_k e_k^dagger`` with
    ``e_k = (o_{2k-1} + i o_{2k}) / sqrt(2)`` from a real orthogonal matrix,
    so ``Gamma P_+ Gamma = 1 - P_+`` as in the field theory.  Test functions
    are complex vectors of length 2n.
    """

    def __init__(self, n: int, rng: np.random.Generator | None = None):
        if n < 1:
            raise ValueError("need at least one mode")
        self.n = n
        rng = rng or np.random.default_rng(0)
        O = ortho_group.rvs(2 * n, random_state=rng) if n > 0 else np.eye(2)
        O = np.atleast_2d(O)
        self.modes = (O[:, 0::2] + 1j * O[:, 1::2]).T / math.sqrt(2)  # (n, 2n), rows e_k
        self.P_plus = self.modes.T @ self.modes.conj()

    def gamma(self, f: np.ndarray) -> np.ndarray:
        return np.conj(f)

    def inner(self, f, g) -> complex:
        return complex(np.vdot(f, g))

    def two_point_result(self, f, g) -> IntegrationResult:
        return IntegrationResult(complex(f @ self.P_plus @ g), 0.0, 0, 0.0)

    def two_point(self, f, g) -> complex:
        return self.two_point_result(f, g).value

    def random_vector(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(size=2 * self.n) + 1j * rng.normal(size=2 * self.n)


def fock_operators(n: int) -> list[np.ndarray]:
    """Jordan-Wigner annihilators c_1..c_n on (C^2)^{n}; |0> is index 0."""
    if n > 5:
        raise TooManyModes(f"{n} modes > 5")
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    one = np.eye(2, dtype=complex)
    ops = []
    for k in range(n):
        mats = [z] * k + [a] + [one] * (n - k - 1)
        ops.append(reduce(np.kron, mats))
    return ops


def fock_oracle(modes: FiniteModeModel, X: FieldPolynomial) -> complex:
    """Exact vacuum element of X with ``B(f) = a*(P_+ f) + a(P_+ Gamma f)``."""
    if modes.n > 5:
        raise TooManyModes(f"{modes.n} modes > 5")
    cs = fock_operators(modes.n)
    dim = 2 ** modes.n

    def B(f) -> np.ndarray:
        out = np.zeros((dim, dim), dtype=complex)
        for e, c in zip(modes.modes, cs):
            out += np.vdot(e, f) * c.conj().T + np.conj(np.vdot(e, np.conj(f))) * c
        return out

    total = 0j
    for t in FieldPolynomial.of(X).terms:
        vec = np.zeros(dim, dtype=complex)
        vec[0] = 1.0
        for f in reversed(t.factors):
            vec = B(f) @ vec
        total += t.coefficient * vec[0]
    return total
