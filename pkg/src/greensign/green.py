"""Numerical Green's function of u^(n) + M u with two-point conditions.

g(t, s) = P(t - s) + sum_i c_i(s) u_i(t), where P carries the unit jump of the
(n-1)-th derivative at t = s and the coefficients c(s) come from one LU
factorization of the boundary matrix.  The same machinery produces the other
columns g_k of the Green's matrix (jump in derivative k-1), which give the
s-derivatives of g exactly: d^j/ds^j g = (-1)^j g_{n-j}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .combinatorics import _require_complete, adjoint
from .errors import EigenvalueCollisionError, ValidationError
from .ode_basis import RealBasis, build_system

SINGULAR_TOL = 1e-9


def boundary_matrix(space, basis):
    a, b = basis.domain.a, basis.domain.b
    rows = [basis.values(np.array(a), d) for d in space.left]
    rows += [basis.values(np.array(b), d) for d in space.right]
    return np.array(rows, dtype=float).reshape(len(rows), basis.n)


def scaled_det(mat):
    """|det| divided by the product of row norms (Hadamard ratio, in [0, 1])."""
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        return 0.0
    sign, logdet = np.linalg.slogdet(mat / norms[:, None])
    return 0.0 if sign == 0 else float(np.exp(logdet))


def _side_mask(t, s, side, discontinuous):
    plus = t > s
    on_diag = t == s
    if np.any(on_diag):
        if side is None:
            if discontinuous:
                raise ValueError("t == s for a discontinuous derivative: pass side='+' or '-'")
            side = "+"
        if side not in ("+", "-"):
            raise ValueError(f"side must be '+' or '-', got {side!r}")
        plus = plus | (on_diag & (side == "+"))
    return plus


class GreenFunction:
    def __init__(self, space, domain, M):
        _require_complete(space)
        self.space = space
        self.domain = domain
        self.M = float(M)
        self.n = space.n
        self.system = build_system(space.n, self.M)
        self.basis = RealBasis(space.n, self.M, domain)
        mat = boundary_matrix(space, self.basis)
        self.det_scaled = scaled_det(mat)
        if self.det_scaled < SINGULAR_TOL:
            raise EigenvalueCollisionError(
                f"M={self.M:g} is an eigenvalue of {space.name()} (scaled det {self.det_scaled:.2e})",
                self.det_scaled,
            )
        self._lu = lu_factor(mat)

    def _offset(self, column):
        column = self.n if column is None else column
        if not 1 <= column <= self.n:
            raise ValidationError(f"column must lie in [1, {self.n}]", "column")
        return self.n - column

    def coefficients(self, s, column=None):
        """Coefficient vectors c(s), shape (n, len(s))."""
        e = self._offset(column)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        a, b = self.domain.a, self.domain.b
        rhs = []
        for d in self.space.left:
            rhs.append(-self.basis.particular(a - s, d + e, np.zeros(s.shape, bool)))
        for d in self.space.right:
            rhs.append(-self.basis.particular(b - s, d + e, np.ones(s.shape, bool)))
        return lu_solve(self._lu, np.array(rhs))

    def pairs(self, q, t, s, side=None, column=None):
        """q-th t-derivative at matching points (t[i], s[i]); arrays broadcast."""
        e = self._offset(column)
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        shape = t.shape
        t, s = t.ravel(), s.ravel()
        jump_order = self.n - 1 - e
        plus = _side_mask(t, s, side, q >= jump_order)
        coef = self.coefficients(s, column)
        hom = np.einsum("ij,ji->i", self.basis.values(t, q), coef)
        return (hom + self.basis.particular(t - s, q + e, plus)).reshape(shape)

    def grid(self, q, t, s, side=None, column=None):
        """Matrix of q-th t-derivatives, rows indexed by t, columns by s."""
        e = self._offset(column)
        t = np.atleast_1d(np.asarray(t, float))
        s = np.atleast_1d(np.asarray(s, float))
        tt, ss = np.meshgrid(t, s, indexing="ij")
        jump_order = self.n - 1 - e
        plus = _side_mask(tt, ss, side, q >= jump_order)
        hom = self.basis.values(t, q) @ self.coefficients(s, column)
        return hom + self.basis.particular(tt - ss, q + e, plus)

    def __call__(self, t, s, q=0, side=None):
        return float(self.pairs(q, t, s, side))


def build_green(space, domain, M):
    return GreenFunction(space, domain, M)


def eval_q(green, q, t, s, side=None):
    if isinstance(q, bool) or not isinstance(q, int) or not 0 <= q <= green.n - 1:
        raise ValidationError(f"q must lie in [0, {green.n - 1}], got {q!r}", "q")
    return float(green.pairs(q, t, s, side))


def interior_grid(domain, size):
    h = domain.length / size
    return domain.a + h * (np.arange(size) + 0.5)


@dataclass
class VerificationReport:
    ode_residual: float
    bc_residual: float
    continuity_mismatch: float
    jump_error: float
    adjoint_error: float | None
    s_derivative_error: float
    tolerances: dict

    @property
    def passed(self):
        checks = {
            "ode_residual": self.ode_residual,
            "bc_residual": self.bc_residual,
            "continuity_mismatch": self.continuity_mismatch,
            "jump_error": self.jump_error,
            "s_derivative_error": self.s_derivative_error,
        }
        if self.adjoint_error is not None:
            checks["adjoint_error"] = self.adjoint_error
        return all(v <= self.tolerances[k] for k, v in checks.items())

    def to_json(self):
        out = {k: getattr(self, k) for k in (
            "ode_residual", "bc_residual", "continuity_mismatch", "jump_error",
            "adjoint_error", "s_derivative_error")}
        out["tolerances"] = dict(self.tolerances)
        out["passed"] = self.passed
        return out


def verify_green(green, grid=101, seed=0):
    n, M, dom = green.n, green.M, green.domain
    pts = interior_grid(dom, grid)
    scale = 1.0 + abs(M)

    g0 = green.grid(0, pts, pts)
    off = ~np.eye(grid, dtype=bool)
    gn = green.grid(n, pts, pts, side="+")
    ode = float(np.max(np.abs(gn + M * g0)[off]) / (1.0 + abs(M) * np.max(np.abs(g0))))

    bc = 0.0
    for d in green.space.left:
        bc = max(bc, float(np.max(np.abs(green.grid(d, [dom.a], pts)))))
    for d in green.space.right:
        bc = max(bc, float(np.max(np.abs(green.grid(d, [dom.b], pts)))))

    cont = 0.0
    for d in range(n - 1):
        diff = green.pairs(d, pts, pts, "+") - green.pairs(d, pts, pts, "-")
        cont = max(cont, float(np.max(np.abs(diff))))
    jump = green.pairs(n - 1, pts, pts, "+") - green.pairs(n - 1, pts, pts, "-")
    jump_err = float(np.max(np.abs(jump - 1.0)))

    adj_err = None
    try:
        hat = GreenFunction(adjoint(green.space), dom, (-1) ** n * M)
    except EigenvalueCollisionError:
        hat = None
    if hat is not None:
        ghat = hat.grid(0, pts, pts)
        adj_err = float(np.max(np.abs(ghat - (-1) ** n * g0.T)))

    # s-derivative relation at j = 1 by central differences
    rng = np.random.default_rng(seed)
    step = 1e-5
    lo, hi = dom.a + 0.05 * dom.length, dom.b - 0.05 * dom.length
    ts = rng.uniform(lo, hi, 20)
    ss = rng.uniform(lo, hi, 20)
    close = np.abs(ts - ss) < 10 * step
    ss[close] = np.where(ss[close] + 0.1 * dom.length < hi, ss[close] + 0.1 * dom.length,
                         ss[close] - 0.1 * dom.length)
    ds = (green.pairs(0, ts, ss + step) - green.pairs(0, ts, ss - step)) / (2 * step)
    column = green.pairs(0, ts, ss, column=n - 1)
    sder = float(np.max(np.abs(-ds - column)))

    tol = {
        "ode_residual": 1e-8,
        "bc_residual": 1e-10 * scale,
        "continuity_mismatch": 1e-8 * scale,
        "jump_error": 1e-8 * scale,
        "adjoint_error": 1e-8 * scale,
        "s_derivative_error": 1e-5 * scale,
    }
    return VerificationReport(ode, bc, cont, jump_err, adj_err, sder, tol)


def dump_grid(green, path, grid=101):
    """CSV of g and its t-derivatives over a uniform interior grid, row-major."""
    pts = interior_grid(green.domain, grid)
    layers = [green.grid(q, pts, pts, side="+") for q in range(green.n)]
    header = ["t", "s", "g"] + [f"dg{q}" for q in range(1, green.n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, t in enumerate(pts):
            for j, s in enumerate(pts):
                w.writerow([repr(float(t)), repr(float(s))] + [repr(float(L[i, j])) for L in layers])
