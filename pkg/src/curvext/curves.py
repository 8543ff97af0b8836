"""Polynomial and monomial curves in R^d.

A curve is stored as a ``d x (N+1)`` coefficient matrix ``c`` so that the
i-th component is ``sum_j c[i, j] * t**j``.  All operations here are exact
coefficient manipulations in double precision; nothing is sampled.

Conventions
-----------
* ``torsion_scalar`` is ``det(g', g'', ..., g^(d))``.
* ``affine_density`` is ``|torsion|**(2 / (d*d + d))``.
* ``dilation_matrix(l, delta)`` is ``diag(delta**l_j)``; the moment-curve
  dilation uses ``l = (1, ..., d)``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError, SingularTorsionError

MAX_DEGREE = 12
MAX_DIM = 4
SINGULARITY_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PolynomialCurve:
    """Curve ``t -> (sum_j c[i, j] t^j)_i`` with real coefficients."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if c.ndim != 2:
            raise ValueError("coefficients must be a d x (N+1) matrix")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        d, n1 = c.shape
        if d < 1 or d > MAX_DIM:
            raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {d}")
        if n1 - 1 > MAX_DEGREE:
            raise ValueError(
                f"degree bound {n1 - 1} exceeds the guarded maximum {MAX_DEGREE}"
            )
        object.__setattr__(self, "coefficients", _frozen(c))

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    @property
    def degree_bound(self) -> int:
        return self.coefficients.shape[1] - 1

    def __call__(self, t):
        """Evaluate; scalar ``t`` gives shape ``(d,)``, arrays give ``t.shape + (d,)``."""
        t = np.asarray(t, dtype=float)
        out = np.polynomial.polynomial.polyval(t, self.coefficients.T)
        # polyval broadcasts coefficient trailing dims first
        return np.moveaxis(out, 0, -1)

    def derivative(self, order: int = 1) -> "PolynomialCurve":
        if order < 0:
            raise ValueError("order must be non-negative")
        if order == 0:
            return self
        c = self.coefficients
        n1 = c.shape[1]
        if order >= n1:
            return PolynomialCurve(np.zeros((self.dim, 1)))
        der = np.polynomial.polynomial.polyder(c, m=order, axis=1)
        return PolynomialCurve(der)

    def derivative_columns(self, t: float, orders: Sequence[int]) -> np.ndarray:
        """Matrix whose k-th column is the ``orders[k]``-th derivative at ``t``."""
        return np.column_stack([self.derivative(j)(t) for j in orders])

    def padded(self, degree: int) -> "PolynomialCurve":
        if degree < self.degree_bound:
            raise ValueError("cannot pad to a smaller degree")
        c = np.zeros((self.dim, degree + 1))
        c[:, : self.degree_bound + 1] = self.coefficients
        return PolynomialCurve(c)

    def scaled(self, factor: float) -> "PolynomialCurve":
        return PolynomialCurve(factor * self.coefficients)

    def linear_image(self, matrix) -> "PolynomialCurve":
        """Curve ``t -> matrix @ gamma(t)``."""
        return PolynomialCurve(np.asarray(matrix, dtype=float) @ self.coefficients)

    def reflected(self) -> "PolynomialCurve":
        """Curve ``t -> gamma(-t)``."""
        signs = (-1.0) ** np.arange(self.degree_bound + 1)
        return PolynomialCurve(self.coefficients * signs)

    def composed_affine(self, a: float, delta: float) -> "PolynomialCurve":
        """Coefficients of ``t -> gamma(a + delta*t)`` by binomial expansion."""
        n1 = self.degree_bound + 1
        sub = np.zeros((n1, n1))
        for j in range(n1):
            for k in range(j + 1):
                sub[j, k] = math.comb(j, k) * a ** (j - k) * delta**k
        return PolynomialCurve(self.coefficients @ sub)

    def __eq__(self, other):
        if not isinstance(other, PolynomialCurve):
            return NotImplemented
        n = max(self.degree_bound, other.degree_bound)
        return self.dim == other.dim and np.array_equal(
            self.padded(n).coefficients, other.padded(n).coefficients
        )

    def __hash__(self):
        return hash(self.coefficients.tobytes())

    def to_spec(self) -> str:
        return "polynomial: " + json.dumps(self.coefficients.tolist())


@dataclass(frozen=True)
class MonomialCurve:
    """``t -> (t^l_1 / l_1!, ..., t^l_d / l_d!)`` with ``1 <= l_1 < ... < l_d``."""

    exponents: tuple

    def __post_init__(self):
        ex = tuple(int(x) for x in self.exponents)
        if len(ex) < 1 or len(ex) > MAX_DIM:
            raise ValueError(f"need 1 to {MAX_DIM} exponents, got {len(ex)}")
        if ex[0] < 1 or any(b <= a for a, b in zip(ex, ex[1:])):
            raise ValueError(f"exponents must be strictly increasing positive integers: {ex}")
        if ex[-1] > MAX_DEGREE:
            raise ValueError(f"exponent {ex[-1]} exceeds the guarded maximum degree {MAX_DEGREE}")
        object.__setattr__(self, "exponents", ex)

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @property
    def weight(self) -> int:
        """``|l| = l_1 + ... + l_d``."""
        return sum(self.exponents)

    @property
    def parity(self) -> str:
        return parity_class(self)

    def to_polynomial(self) -> PolynomialCurve:
        c = np.zeros((self.dim, self.exponents[-1] + 1))
        for i, l in enumerate(self.exponents):
            c[i, l] = 1.0 / math.factorial(l)
        return PolynomialCurve(c)

    def __call__(self, t):
        return self.to_polynomial()(t)

    def to_spec(self) -> str:
        return "monomial: " + json.dumps(list(self.exponents))


CurveLike = Union[PolynomialCurve, MonomialCurve]


def as_polynomial(curve: CurveLike) -> PolynomialCurve:
    if isinstance(curve, MonomialCurve):
        return curve.to_polynomial()
    if isinstance(curve, PolynomialCurve):
        return curve
    raise TypeError(f"expected a curve, got {type(curve).__name__}")


def moment_curve(d: int) -> MonomialCurve:
    return MonomialCurve(tuple(range(1, d + 1)))


def torsion_scalar(curve: CurveLike, t):
    """``det(gamma'(t), ..., gamma^(d)(t))``; vectorised over ``t``."""
    poly = as_polynomial(curve)
    d = poly.dim
    t_arr = np.asarray(t, dtype=float)
    cols = [poly.derivative(j)(t_arr) for j in range(1, d + 1)]
    mats = np.stack(cols, axis=-1)  # (..., d, d) with columns = derivatives
    det = np.linalg.det(mats)
    return float(det) if np.ndim(det) == 0 else det


def affine_density(curve: CurveLike, t):
    """Affine arclength density ``|L(t)|**(2/(d^2+d))``."""
    d = as_polynomial(curve).dim
    val = np.abs(torsion_scalar(curve, t)) ** (2.0 / (d * d + d))
    return float(val) if np.ndim(val) == 0 else val


def torsion_polynomial(curve: CurveLike) -> np.ndarray:
    """Power-basis coefficients of ``t -> L(t)`` (exact via polynomial products)."""
    poly = as_polynomial(curve)
    d = poly.dim
    P = np.polynomial.polynomial
    ders = [poly.derivative(j).coefficients for j in range(1, d + 1)]

    def det_rec(rows: list[int], col: int):
        # Laplace expansion along column `col`; entries are polynomials
        if len(rows) == 1:
            return ders[col][rows[0]]
        acc = np.zeros(1)
        for idx, r in enumerate(rows):
            minor = det_rec(rows[:idx] + rows[idx + 1 :], col + 1)
            term = P.polymul(ders[col][r], minor)
            acc = P.polyadd(acc, term if idx % 2 == 0 else -term)
        return acc

    return P.polytrim(np.atleast_1d(det_rec(list(range(d)), 0)), tol=0)


@dataclass(frozen=True, eq=False)
class TorsionMatrix:
    """Columns ``gamma'(a), ..., gamma^(d)(a)``."""

    entries: np.ndarray
    basepoint: float

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    def singularity_threshold(self) -> float:
        d = self.entries.shape[0]
        scale = float(np.max(np.abs(self.entries))) if self.entries.size else 0.0
        return SINGULARITY_RTOL * scale**d

    def is_singular(self) -> bool:
        det = self.det
        return abs(det) < self.singularity_threshold() or det == 0.0

    def inverse(self) -> np.ndarray:
        if self.is_singular():
            raise SingularTorsionError(self.basepoint, self.det, self.singularity_threshold())
        return np.linalg.inv(self.entries)


def torsion_matrix(curve: CurveLike, a: float) -> TorsionMatrix:
    poly = as_polynomial(curve)
    cols = poly.derivative_columns(float(a), range(1, poly.dim + 1))
    return TorsionMatrix(cols, float(a))


def dilation_matrix(exponents: Sequence[int], delta: float) -> np.ndarray:
    """``diag(delta**l_j)``; negative ``delta`` gives the time-reversal dilations."""
    if delta == 0:
        raise DomainError("dilation parameter must be nonzero")
    ex = [int(l) for l in exponents]
    return np.diag([float(delta) ** l for l in ex])


def moment_dilation(d: int, delta: float) -> np.ndarray:
    return dilation_matrix(range(1, d + 1), delta)


def pseudo_rescale(curve: CurveLike, a: float, delta: float) -> PolynomialCurve:
    """Blow-up of ``curve`` at ``a``: ``D_{1/delta} T(a)^{-1} (gamma(a + delta t) - gamma(a))``.

    The result is exact at the coefficient level and tends to the moment
    curve as ``delta -> 0`` whenever ``L(a) != 0``.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    poly = as_polynomial(curve)
    d = poly.dim
    tinv = torsion_matrix(poly, a).inverse()
    shifted = poly.composed_affine(float(a), float(delta)).coefficients.copy()
    shifted[:, 0] = 0.0  # subtract gamma(a) exactly
    c = moment_dilation(d, 1.0 / delta) @ tinv @ shifted
    return PolynomialCurve(c)


def parity_class(curve: MonomialCurve) -> str:
    """``"odd"`` if every exponent is odd, ``"even"`` if every one is even, else ``"neither"``."""
    ex = curve.exponents if isinstance(curve, MonomialCurve) else tuple(curve)
    if all(l % 2 == 1 for l in ex):
        return "odd"
    if all(l % 2 == 0 for l in ex):
        return "even"
    return "neither"


def curve_cn_distance(a: CurveLike, b: CurveLike, R: float, N: int) -> float:
    """Upper bound for ``max_{j<=N} sup_{|t|<=R} |a^(j)(t) - b^(j)(t)|_inf``.

    Computed from coefficient differences: the j-th derivative of
    ``sum_k c_k t^k`` is bounded on ``[-R, R]`` by ``sum_k |c_k| k!/(k-j)! R^(k-j)``.
    Vector norm is the max over components.
    """
    pa, pb = as_polynomial(a), as_polynomial(b)
    if pa.dim != pb.dim:
        raise ValueError("curves must have the same dimension")
    n = max(pa.degree_bound, pb.degree_bound)
    if n > N:
        raise DomainError(f"curves have degree up to {n} > N={N}")
    diff = np.abs(pa.padded(n).coefficients - pb.padded(n).coefficients)
    best = 0.0
    for j in range(N + 1):
        k = np.arange(j, n + 1)
        if k.size == 0:
            break
        fac = np.array([math.perm(int(kk), j) for kk in k], dtype=float)
        bound = (diff[:, j:] * fac * float(R) ** (k - j)).sum(axis=1).max()
        best = max(best, float(bound))
    return best


_SPEC_RE = re.compile(r"^\s*(monomial|polynomial)\s*:\s*(.+)$", re.DOTALL)


def parse_curve(spec) -> CurveLike:
    """Parse ``"monomial: [1,3]"`` / ``"polynomial: [[...], ...]"`` or an equivalent dict."""
    if isinstance(spec, (MonomialCurve, PolynomialCurve)):
        return spec
    if isinstance(spec, dict):
        if "monomial" in spec:
            return MonomialCurve(tuple(spec["monomial"]))
        if "polynomial" in spec:
            return PolynomialCurve(np.asarray(spec["polynomial"], dtype=float))
        raise ConfigError(f"curve dict needs a 'monomial' or 'polynomial' key: {spec!r}")
    if not isinstance(spec, str):
        raise ConfigError(f"cannot parse curve from {type(spec).__name__}")
    m = _SPEC_RE.match(spec)
    if not m:
        raise ConfigError(f"unrecognised curve spec: {spec!r}")
    kind, body = m.groups()
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed curve data in {spec!r}: {exc}") from None
    try:
        if kind == "monomial":
            return MonomialCurve(tuple(data))
        return PolynomialCurve(np.asarray(data, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ScalingPair:
    """Exponents on the scaling line ``q = (d^2+d)/2 * p'``."""

    p: float
    q: float
    d: int

    def __post_init__(self):
        p, q, d = float(self.p), float(self.q), int(self.d)
        if not p > 1:
            raise ConfigError(f"p must exceed 1, got {p}")
        expected = (d * d + d) / 2 * p / (p - 1)
        if not math.isclose(q, expected, rel_tol=1e-12):
            raise ConfigError(
                f"q must equal (d^2+d)/2 * p' = {expected:.12g} for p={p}, d={d}; got q={q}"
            )
        if not q > (d * d + d + 2) / 2:
            raise ConfigError(
                f"q = {q} violates q > (d^2+d+2)/2 = {(d * d + d + 2) / 2}"
            )
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_p(cls, p: float, d: int) -> "ScalingPair":
        return cls(p, (d * d + d) / 2 * p / (p - 1), d)

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)
