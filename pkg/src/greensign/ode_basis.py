"""Solutions of u^(n) + M u = 0 and the Cauchy kernel.

Two layers live here:

* ``FundamentalSystem`` / ``eval_basis`` / ``cauchy_kernel``: the textbook
  system exp(r_j t) with r_j^n = -M (monomials when M = 0).
* ``RealBasis``: a real fundamental system tuned for work on a fixed [a, b].
  For small m(b-a), with m = |M|^(1/n), it is the Taylor system at a
  (u_i^(d)(a) = delta_id), evaluated by power series, which stays accurate
  as M -> 0.  Otherwise each exponential is anchored at the endpoint where
  it is largest, exp(r (t - c)), so every entry is bounded by m^d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalConsistencyError, ValidationError

ZERO_M = 1e-12
# m*|x| at or below this uses the power series instead of exponentials
SERIES_LIMIT = 3.0
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class Domain:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
            raise ValidationError(f"domain needs finite a < b, got [{self.a}, {self.b}]", "domain")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self):
        return self.b - self.a


UNIT = Domain(0.0, 1.0)


def characteristic_roots(n, M):
    """Roots of r^n = -M, ordered by angle. All zero when M is negligible."""
    if abs(M) < ZERO_M:
        return np.zeros(n, dtype=complex)
    m = abs(M) ** (1.0 / n)
    offset = 1.0 if M > 0 else 0.0
    angles = np.pi * (2 * np.arange(n) + offset) / n
    return m * np.exp(1j * angles)


@dataclass(frozen=True, eq=False)
class FundamentalSystem:
    n: int
    M: float
    roots: np.ndarray
    kind: str  # "Monomial" or "Exponential"

    @property
    def m(self):
        return 0.0 if self.kind == "Monomial" else abs(self.M) ** (1.0 / self.n)


def build_system(n, M):
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise ValidationError(f"order n must be an integer >= 2, got {n!r}", "n")
    M = float(M)
    if not math.isfinite(M):
        raise ValidationError(f"M must be finite, got {M}", "M")
    if abs(M) < ZERO_M:
        return FundamentalSystem(n, 0.0, np.zeros(n, dtype=complex), "Monomial")
    return FundamentalSystem(n, M, characteristic_roots(n, M), "Exponential")


def eval_basis(sys, t, d, prescale_from=None):
    """d-th derivatives of the basis functions at t (complex vector of length n).

    With ``prescale_from=a`` every entry is multiplied by
    exp(-max_j Re(r_j) (t - a)), which keeps values finite for large m(t-a).
    """
    if isinstance(d, bool) or not isinstance(d, int) or not 0 <= d <= sys.n:
        raise ValidationError(f"derivative order must lie in [0, {sys.n}], got {d!r}", "d")
    n = sys.n
    if sys.kind == "Monomial":
        out = np.zeros(n, dtype=complex)
        for i in range(d, n):
            out[i] = t ** (i - d) / math.factorial(i - d)
        return out
    r = sys.roots
    expo = r * t
    if prescale_from is not None:
        expo = expo - np.max(r.real) * (t - prescale_from)
    return r**d * np.exp(expo)


def _series_kernel(n, M, x, p):
    """K^(p)(x) for 0 <= p <= n-1 by its power series; x is an array."""
    x = np.asarray(x, dtype=float)
    first = n - 1 - p
    term = x**first / math.factorial(first)
    total = term.copy()
    if M == 0.0:
        return total
    mx = np.max(np.abs(x)) * abs(M) ** (1.0 / n) if x.size else 0.0
    # terms decay like (m x)^(kn)/(kn)!; stop well past the peak
    k_max = int(max(4, (2.0 * mx + 40.0) / n + 2))
    power = first
    for _ in range(k_max):
        ratio = 1.0
        for i in range(1, n + 1):
            ratio *= power + i
        term = term * (-M) * x**n / ratio
        power += n
        total = total + term
        if not np.any(np.abs(term) > 1e-18 * (np.abs(total) + 1e-300)):
            break
    return total


def _exp_kernel(roots, n, x, p):
    x = np.asarray(x, dtype=float)
    coef = roots ** (p - n + 1) / n
    vals = np.exp(np.multiply.outer(x, roots)) @ coef
    return vals


def kernel_values(n, M, x, p):
    """K^(p)(x) for any p >= 0, vectorized over x, real output."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if abs(M) < ZERO_M:
        M = 0.0
    if p >= n:
        if M == 0.0:
            return np.zeros_like(x)
        return -M * kernel_values(n, M, x, p - n)
    if M == 0.0:
        return _series_kernel(n, 0.0, x, p)
    m = abs(M) ** (1.0 / n)
    out = np.empty_like(x)
    small = m * np.abs(x) <= SERIES_LIMIT
    if np.any(small):
        out[small] = _series_kernel(n, M, x[small], p)
    if np.any(~small):
        vals = _exp_kernel(characteristic_roots(n, M), n, x[~small], p)
        resid = np.abs(vals.imag)
        if np.any(resid > IMAG_TOL * (1.0 + np.abs(vals.real))):
            raise NumericalConsistencyError(
                f"Cauchy kernel imaginary residue {resid.max():.3e} exceeds tolerance"
            )
        out[~small] = vals.real
    return out


def cauchy_kernel(sys, x, d):
    """d-th derivative at x of the solution with K^(i)(0) = 0 (i < n-1), K^(n-1)(0) = 1."""
    if isinstance(d, bool) or not isinstance(d, int) or not 0 <= d <= sys.n:
        raise ValidationError(f"derivative order must lie in [0, {sys.n}], got {d!r}", "d")
    return float(kernel_values(sys.n, sys.M, x, d)[0])


class RealBasis:
    """Real fundamental system of u^(n) + M u = 0 adapted to a domain [a, b]."""

    def __init__(self, n, M, domain):
        self.n = n
        self.M = 0.0 if abs(M) < ZERO_M else float(M)
        self.domain = domain
        self.m = abs(self.M) ** (1.0 / n)
        self.roots = characteristic_roots(n, self.M)
        tol = 1e-12 * max(self.m, 1.0)
        self.growing = self.roots.real > tol
        # total growth rate of the anchored-at-b columns, used by determinant scaling
        self.growth = float(np.sum(self.roots.real[self.growing]))
        if self.m * domain.length <= SERIES_LIMIT:
            self.kind = "taylor"
            return
        self.kind = "exponential"
        cols = []
        for r, grow in zip(self.roots, self.growing):
            anchor = domain.b if grow else domain.a
            if abs(r.imag) <= tol:
                cols.append((complex(r.real, 0.0), anchor, "re"))
            elif r.imag > 0:
                cols.append((r, anchor, "re"))
                cols.append((r, anchor, "im"))
        self._cols = cols
        self._col_roots = np.array([c[0] for c in cols])
        self._col_anchor = np.array([c[1] for c in cols])
        self._col_imag = np.array([c[2] == "im" for c in cols])

    def values(self, t, d):
        """Array of shape t.shape + (n,) with the d-th derivatives of the basis."""
        t = np.asarray(t, dtype=float)
        if self.kind == "taylor":
            x = t - self.domain.a
            out = np.empty(t.shape + (self.n,))
            for i in range(self.n):
                out[..., i] = kernel_values(self.n, self.M, x.ravel(), self.n - 1 - i + d).reshape(t.shape)
            return out
        r = self._col_roots
        w = r**d * np.exp(np.multiply.outer(t, r) - r * self._col_anchor)
        return np.where(self._col_imag, w.imag, w.real)

    def wronskian_at_a(self):
        return np.stack([self.values(np.array(self.domain.a), d) for d in range(self.n)])

    def particular(self, x, order, plus):
        """A particular part with unit jump in derivative n-1-order0, differentiated.

        ``order`` is the total derivative order of the Cauchy kernel.  ``plus``
        marks points treated as t >= s.  In the exponential regime growing modes
        are placed on the t < s side (differences are homogeneous solutions,
        absorbed by the coefficients), so nothing overflows.
        """
        x = np.asarray(x, dtype=float)
        plus = np.broadcast_to(plus, x.shape)
        if self.kind == "taylor":
            out = np.zeros(x.shape)
            if np.any(plus):
                out[plus] = kernel_values(self.n, self.M, x[plus], order)
            return out
        n = self.n
        r = self.roots
        coef = r ** (order - n + 1) / n
        e = np.exp(np.multiply.outer(x, r)) * coef
        keep = np.where(self.growing, ~plus[..., None], plus[..., None])
        sign = np.where(self.growing, -1.0, 1.0)
        vals = np.sum(np.where(keep, e * sign, 0.0), axis=-1)
        return vals.real
