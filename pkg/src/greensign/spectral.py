"""First eigenvalues of u^(n) + lambda u = 0 in a two-point space.

``char_det`` is det of the boundary matrix of the Taylor system at a (an
entire function of lambda, zero exactly at eigenvalues) times the positive
factor exp(-sum of growing root real parts * (b-a)).  In the exponential
regime it is obtained from the anchored basis through the Wronskian at a, so
the value is finite and its sign is consistent for all lambda.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .combinatorics import _require_complete
from .errors import ValidationError
from .green import boundary_matrix, scaled_det
from .ode_basis import RealBasis

FIRST_POSITIVE = "FirstPositive"
FIRST_NEGATIVE = "FirstNegative"
RESIDUAL_TOL = 1e-9


def char_det(space, domain, lam):
    _require_complete(space)
    basis = RealBasis(space.n, lam, domain)
    mat = boundary_matrix(space, basis)
    damp = -basis.growth * domain.length
    if basis.kind == "taylor":
        return float(np.linalg.det(mat) * math.exp(damp))
    sign_b, log_b = np.linalg.slogdet(mat)
    if sign_b == 0:
        return 0.0
    sign_w, log_w = np.linalg.slogdet(basis.wronskian_at_a())
    return float(sign_b * sign_w * math.exp(log_b - log_w + damp))


def char_det_scaled(space, domain, lam):
    """Hadamard-normalized |det| of the boundary matrix; small near eigenvalues."""
    basis = RealBasis(space.n, lam, domain)
    return scaled_det(boundary_matrix(space, basis))


@dataclass(frozen=True)
class EigenQuery:
    space: object
    domain: object
    direction: str
    m_max: float | None = None
    scan_points: int = 2000
    refine_tol: float = 1e-12

    def __post_init__(self):
        _require_complete(self.space)
        if self.direction not in (FIRST_POSITIVE, FIRST_NEGATIVE):
            raise ValidationError(f"direction must be {FIRST_POSITIVE} or {FIRST_NEGATIVE}", "direction")
        if self.m_max is None:
            object.__setattr__(self, "m_max", 20.0 / self.domain.length)
        if not self.m_max > 0:
            raise ValidationError("m_max must be positive", "m_max")
        if self.scan_points < 100:
            raise ValidationError("scan_points must be at least 100", "scan_points")
        if not self.refine_tol > 0:
            raise ValidationError("refine_tol must be positive", "refine_tol")

    @property
    def sign(self):
        return 1.0 if self.direction == FIRST_POSITIVE else -1.0


@dataclass(frozen=True)
class EigenResult:
    lam: float
    m: float
    bracket: tuple
    residual: float
    kernel: np.ndarray = field(compare=False, repr=False)
    direction: str = FIRST_NEGATIVE
    dips: tuple = ()

    def to_json(self):
        return {"lambda": self.lam, "m": self.m, "residual": self.residual,
                "bracket_m": list(self.bracket), "direction": self.direction}


@dataclass(frozen=True)
class NotFoundInRange:
    direction: str
    m_max: float
    scan_points: int
    dips: tuple = ()

    def to_json(self):
        return {"found": False, "direction": self.direction, "m_max": self.m_max,
                "scan_points": self.scan_points, "granularity_m": self.m_max / self.scan_points}


def _null_vector(mat):
    _, sv, vt = np.linalg.svd(mat)
    if sv[0] > 0 and len(sv) > 1 and sv[-2] / sv[0] < 1e-6:
        warnings.warn("boundary matrix looks rank deficient beyond corank 1", RuntimeWarning)
    return vt[-1]


@functools.lru_cache(maxsize=4096)
def first_eigenvalue(query):
    sp, dom, sgn = query.space, query.domain, query.sign
    n = sp.n
    ms = np.linspace(query.m_max / query.scan_points, query.m_max, query.scan_points)

    def F(m):
        return char_det(sp, dom, sgn * m**n)

    vals = np.array([F(m) for m in ms])
    mags = np.abs(vals)
    dips = []
    hit = None
    for i in range(len(ms) - 1):
        if vals[i] == 0.0:
            hit = (ms[i], ms[i])
            break
        if vals[i] * vals[i + 1] < 0:
            hit = (ms[i], ms[i + 1])
            break
        # local minimum of |F| without sign change: possible double root
        if 0 < i and mags[i] < mags[i - 1] and mags[i] < mags[i + 1] and mags[i] < 1e-3 * max(mags[i - 1], mags[i + 1]):
            dips.append(float(ms[i]))
    if hit is None:
        return NotFoundInRange(query.direction, float(query.m_max), query.scan_points, tuple(dips))
    lo, hi = hit
    f_lo = F(lo)
    while hi - lo > query.refine_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = F(mid)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    m = 0.5 * (lo + hi)
    lam = sgn * m**n
    basis = RealBasis(n, lam, dom)
    mat = boundary_matrix(sp, basis)
    return EigenResult(
        lam=float(lam), m=float(m), bracket=(float(lo), float(hi)),
        residual=scaled_det(mat), kernel=_null_vector(mat),
        direction=query.direction, dips=tuple(dips),
    )


def find_first(space, domain, direction, m_max=None, scan_points=2000, refine_tol=1e-12):
    return first_eigenvalue(EigenQuery(space, domain, direction, m_max, scan_points, refine_tol))


class Eigenfunction:
    """u(t) = sum_i c_i u_i(t) for a null vector c of a boundary matrix."""

    def __init__(self, basis, coef):
        self.basis = basis
        self.coef = np.asarray(coef, dtype=float)
        self.n = basis.n

    def __call__(self, t, d=0):
        t = np.asarray(t, dtype=float)
        return self.basis.values(t, d) @ self.coef

    def normalized(self, samples=1001):
        dom = self.basis.domain
        vals = self(np.linspace(dom.a, dom.b, samples))
        peak = vals[np.argmax(np.abs(vals))]
        return Eigenfunction(self.basis, self.coef / peak)


def boundary_residual(u, space):
    dom = u.basis.domain
    res = [abs(float(u(dom.a, d))) for d in space.left]
    res += [abs(float(u(dom.b, d))) for d in space.right]
    return max(res) if res else 0.0


def eigenfunction(result, space, domain):
    basis = RealBasis(space.n, result.lam, domain)
    u = Eigenfunction(basis, result.kernel).normalized()
    res = boundary_residual(u, space)
    if res > 1e-8:
        raise ValidationError(f"eigenfunction boundary residual {res:.2e} exceeds 1e-8")
    return u


def solution_family(space, domain, M):
    """Nontrivial solution of u^(n) + M u = 0 under n-1 conditions (kernel direction)."""
    if len(space.left) + len(space.right) != space.n - 1:
        raise ValidationError("expected exactly n-1 boundary conditions")
    basis = RealBasis(space.n, M, domain)
    mat = boundary_matrix(space, basis)
    _, _, vt = np.linalg.svd(mat)
    return Eigenfunction(basis, vt[-1]).normalized()


def interior_zero_count(u, samples=2001, rel_tol=1e-9):
    """Sign changes of u on a grid strictly inside the domain."""
    dom = u.basis.domain
    t = np.linspace(dom.a, dom.b, samples)[1:-1]
    v = u(t)
    scale = np.max(np.abs(v))
    v = np.where(np.abs(v) <= rel_tol * scale, 0.0, v)
    nz = np.sign(v[v != 0])
    zeros = int(np.sum(nz[1:] != nz[:-1]))
    return zeros + int(np.sum(v == 0))
