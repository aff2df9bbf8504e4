"""Envelope bounds, the cone K, the integral operator L_M and a Picard demonstrator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .combinatorics import CASE_A, CASE_B, CASE_C, derivative_space, eta_gamma
from .errors import PreconditionError, ValidationError
from .green import build_green
from .sign_analysis import STRICT, verify_sign

GL_ORDER = 16


# ---------------------------------------------------------------- envelopes

def _q_sign(space, q):
    """(case, sign factor) making d^q/dt^q g nonnegative in the cone conditions."""
    if q == 0:
        return None, 1.0
    d = derivative_space(space, q)
    if d.sign_case == CASE_A:
        return CASE_A, (-1.0) ** d.d_q
    if d.sign_case == CASE_B:
        return CASE_B, 1.0
    if d.sign_case == CASE_C:
        return CASE_C, (-1.0) ** (space.n - q)
    raise PreconditionError(f"d^{q}/dt^{q} g cannot have constant sign (c_q + d_q < n - q)")


class _Ratio:
    """s -> sign * d^q/dt^q g(t, s) / phi(s), extended to s = a and s = b by its limits."""

    def __init__(self, green, q, sign, eta, gamma):
        self.g, self.q, self.sign = green, q, sign
        self.eta, self.gamma = eta, gamma
        self.a, self.b = green.domain.a, green.domain.b
        n = green.n
        L = self.b - self.a
        self.col_a = n - eta
        self.col_b = n - gamma
        # d^eta/ds^eta g = (-1)^eta g_{n-eta}; the (-1)^gamma at s = b cancels likewise
        self.fac_a = sign * (-1) ** eta / (math.factorial(eta) * L**gamma)
        self.fac_b = sign / (math.factorial(gamma) * L**eta)

    def phi(self, s):
        return (s - self.a) ** self.eta * (self.b - s) ** self.gamma

    def limit_a(self, t):
        t = np.atleast_1d(t)
        return self.fac_a * self.g.pairs(self.q, t, np.full(t.shape, self.a), side="-", column=self.col_a)

    def limit_b(self, t):
        t = np.atleast_1d(t)
        return self.fac_b * self.g.pairs(self.q, t, np.full(t.shape, self.b), side="+", column=self.col_b)

    def interior(self, t, s):
        return self.sign * self.g.pairs(self.q, t, s, side="+") / self.phi(s)

    def extremes(self, t, s_grid):
        """(min, max) over s of the extended ratio at a single t, grid plus local refinement."""
        vals = np.concatenate([self.limit_a(t), self.interior(np.full(s_grid.shape, t), s_grid),
                               self.limit_b(t)])
        s_all = np.concatenate([[self.a], s_grid, [self.b]])
        out = []
        for flip in (1.0, -1.0):
            i = int(np.argmin(flip * vals))
            best = vals[i]
            if 0 < i < len(s_all) - 1:
                lo, hi = s_all[i - 1], s_all[i + 1]
                lo = max(lo, self.a + 1e-9 * (self.b - self.a))
                hi = min(hi, self.b - 1e-9 * (self.b - self.a))

                def obj(s):
                    return flip * float(self.interior(np.array([t]), np.array([s]))[0])

                res = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-13})
                if flip * res.fun < flip * best:
                    best = flip * res.fun
            out.append(float(best))
        return out[0], out[1]


@dataclass
class ConeEnvelope:
    eta: int
    gamma: int
    t: np.ndarray = field(repr=False)
    k1: np.ndarray = field(repr=False)
    k2: np.ndarray = field(repr=False)
    k1_q: dict = field(repr=False)
    k2_q: dict = field(repr=False)
    k1_max: float
    k2_max: float
    m1: float
    k1_q_max: dict
    k2_q_max: dict
    I1: tuple
    sign_blocks: dict  # q -> (case, sign factor)
    ratios: dict = field(repr=False)  # q -> _Ratio (q = 0 is g itself)
    s_grid: np.ndarray = field(repr=False)
    _memo: dict = field(default_factory=dict, repr=False)

    def _both(self, t, q):
        t = np.atleast_1d(np.asarray(t, float))
        key = (q, t.tobytes())
        if key not in self._memo:
            r = self.ratios[q]
            self._memo[key] = np.array([r.extremes(x, self.s_grid) for x in t]).reshape(len(t), 2)
        return self._memo[key]

    def lower(self, t, q=0):
        """k1(t) (or k1^q(t)) at arbitrary points."""
        return self._both(t, q)[:, 0]

    def upper(self, t, q=0):
        return self._both(t, q)[:, 1]

    def to_json(self):
        return {
            "eta": self.eta, "gamma": self.gamma, "k1": self.k1_max, "k2": self.k2_max,
            "m1": self.m1, "I1": list(self.I1),
            "k1_q": {str(q): v for q, v in self.k1_q_max.items()},
            "k2_q": {str(q): v for q, v in self.k2_q_max.items()},
            "sign_blocks": {str(q): {"case": c, "sign": s} for q, (c, s) in self.sign_blocks.items()},
        }


def _max_abs(fn, t_grid, vals, lo, hi):
    """max |fn| over [lo, hi] from tabulated values, refined near the best grid point."""
    absv = np.abs(vals)
    i = int(np.argmax(absv))
    best = float(absv[i])
    if 0 < i < len(t_grid) - 1:
        res = minimize_scalar(lambda x: -abs(fn(x)), bounds=(max(lo, t_grid[i - 1]), min(hi, t_grid[i + 1])),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def _min_abs(fn, lo, hi, samples=201):
    ts = np.linspace(lo, hi, samples)
    vals = np.abs(np.array([fn(x) for x in ts]))
    i = int(np.argmin(vals))
    best = float(vals[i])
    if 0 < i < samples - 1:
        res = minimize_scalar(lambda x: abs(fn(x)), bounds=(ts[i - 1], ts[i + 1]),
                              method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return best


def build_envelope(green, q_list=(), I1=None, grid=201, s_grid=401, check_sign=True):
    space, dom = green.space, green.domain
    q_list = sorted(set(int(q) for q in q_list))
    if I1 is None:
        I1 = (dom.a + 0.25 * dom.length, dom.b - 0.25 * dom.length)
    I1 = (float(I1[0]), float(I1[1]))
    if not dom.a <= I1[0] < I1[1] <= dom.b:
        raise ValidationError("I1 must be a subinterval of the domain", "I1")
    blocks = {q: _q_sign(space, q) for q in q_list}
    if check_sign:
        rep = verify_sign(space, dom, 0, green.M, green=green)
        if rep.verdict != STRICT or rep.sign != "StronglyPositive":
            raise PreconditionError(f"g_M is not confirmed strictly positive (verdict {rep.verdict})")
        for q, (case, sgn) in blocks.items():
            rep = verify_sign(space, dom, q, green.M, green=green)
            if case == CASE_A:
                ok = rep.verdict == STRICT and (rep.min_value > 0) == (sgn > 0)
            else:
                worst = min(sgn * rep.min_value, sgn * rep.max_value)
                ok = worst >= -1e-9 * max(abs(rep.min_value), abs(rep.max_value))
            if not ok:
                raise PreconditionError(f"sign of d^{q}/dt^{q} g_M not confirmed (verdict {rep.verdict})")

    eta, gamma = eta_gamma(space)
    t = np.linspace(dom.a, dom.b, grid)
    sg = np.linspace(dom.a, dom.b, s_grid)[1:-1]
    ratios = {0: _Ratio(green, 0, 1.0, eta, gamma)}
    for q, (case, sgn) in blocks.items():
        if case == CASE_A:
            ratios[q] = _Ratio(green, q, sgn, eta, gamma)

    tables = {}
    for q, r in ratios.items():
        ext = np.array([r.extremes(x, sg) for x in t])
        tables[q] = (ext[:, 0], ext[:, 1])
        if not np.all(np.isfinite(ext)):
            raise ArithmeticError("non-finite envelope values")

    def k1_fn(q):
        return lambda x: ratios[q].extremes(x, sg)[0]

    def k2_fn(q):
        return lambda x: ratios[q].extremes(x, sg)[1]

    k1_max = _max_abs(k1_fn(0), t, tables[0][0], dom.a, dom.b)
    k2_max = _max_abs(k2_fn(0), t, tables[0][1], dom.a, dom.b)
    m1 = _min_abs(k1_fn(0), *I1)
    k1_qm, k2_qm = {}, {}
    for q in ratios:
        if q == 0:
            continue
        k1_qm[q] = _max_abs(k1_fn(q), t, tables[q][0], dom.a, dom.b)
        k2_qm[q] = _max_abs(k2_fn(q), t, tables[q][1], dom.a, dom.b)
    return ConeEnvelope(
        eta=eta, gamma=gamma, t=t, k1=tables[0][0], k2=tables[0][1],
        k1_q={q: tables[q][0] for q in ratios if q}, k2_q={q: tables[q][1] for q in ratios if q},
        k1_max=k1_max, k2_max=k2_max, m1=m1, k1_q_max=k1_qm, k2_q_max=k2_qm, I1=I1,
        sign_blocks=blocks, ratios=ratios, s_grid=sg,
    )


# ---------------------------------------------------------------- sampled functions

class Mesh:
    """Composite Gauss-Legendre panels; output points are the nodes plus panel edges."""

    def __init__(self, domain, panels=8, order=GL_ORDER):
        if panels < 2:
            raise ValidationError("quadrature needs at least 2 panels", "panels")
        self.domain, self.panels, self.order = domain, panels, order
        self.edges = np.linspace(domain.a, domain.b, panels + 1)
        x, w = np.polynomial.legendre.leggauss(order)
        self.ref_x, self.ref_w = x, w
        half = np.diff(self.edges) / 2
        mid = (self.edges[:-1] + self.edges[1:]) / 2
        self.nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        self.weights = (half[:, None] * w[None, :]).ravel()
        pts = np.concatenate([self.nodes, self.edges])
        order_idx = np.argsort(pts, kind="stable")
        self.points = pts[order_idx]
        self.node_index = np.searchsorted(self.points, self.nodes)
        # barycentric weights for GL nodes on [-1, 1]
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        self.bary = 1.0 / np.prod(diff, axis=1)

    def interp_matrix(self, panel, targets):
        """Rows map the panel's nodal values to values at ``targets``."""
        lo, hi = self.edges[panel], self.edges[panel + 1]
        xr = (2 * np.asarray(targets) - lo - hi) / (hi - lo)
        diff = xr[:, None] - self.ref_x[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15)
        diff[exact] = 1.0
        terms = self.bary[None, :] / diff
        mat = terms / terms.sum(axis=1, keepdims=True)
        rows = np.any(exact, axis=1)
        mat[rows] = exact[rows].astype(float)
        return mat


@dataclass
class SampledFunction:
    mesh: Mesh
    values: np.ndarray  # shape (n, len(mesh.points)); row d is u^(d)

    @property
    def t(self):
        return self.mesh.points

    @classmethod
    def from_callable(cls, mesh, u, n):
        """u(t, d) -> d-th derivative values."""
        return cls(mesh, np.array([np.asarray(u(mesh.points, d), float) * np.ones(mesh.points.shape)
                                   for d in range(n)]))

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))


class IntegralOperator:
    """Matrices W_d with (L u)^(d)(t_i) = sum_k W_d[i, k] F(s_k), F sampled at the GL nodes."""

    def __init__(self, green, mesh):
        self.green, self.mesh = green, mesh
        n = green.n
        N = len(mesh.nodes)
        P = len(mesh.points)
        mats = np.zeros((n, P, N))
        x, w = mesh.ref_x, mesh.ref_w
        order = mesh.order
        for i, t in enumerate(mesh.points):
            # panel strictly containing t (t is then an interior node), if any
            inside = np.nonzero((mesh.edges[:-1] < t) & (t < mesh.edges[1:]))[0]
            split = int(inside[0]) if inside.size else None
            full = np.ones(N, bool)
            if split is not None:
                full[split * order:(split + 1) * order] = False
            s_full = mesh.nodes[full]
            pieces = []
            if split is not None:
                lo, hi = mesh.edges[split], mesh.edges[split + 1]
                for u0, u1 in ((lo, t), (t, hi)):
                    half = (u1 - u0) / 2
                    sub = (u0 + u1) / 2 + half * x
                    pieces.append((sub, half * w, mesh.interp_matrix(split, sub)))
            for d in range(n):
                row = np.zeros(N)
                row[full] = mesh.weights[full] * green.pairs(d, np.full(s_full.shape, t), s_full, side="+")
                for sub, sw, interp in pieces:
                    kern = green.pairs(d, np.full(sub.shape, t), sub, side="+")
                    row[split * order:(split + 1) * order] += (sw * kern) @ interp
                mats[d, i] = row
        self.mats = mats

    def __call__(self, F):
        return self.mats @ F


# ---------------------------------------------------------------- problems

def f_example(t, x):
    """(t^4 + 1) (exp(-|x|_2) + 1 / log(e + |x|_1)); x has shape (n, N)."""
    x = np.asarray(x, float)
    return (t**4 + 1) * (np.exp(-np.sqrt(np.sum(x**2, axis=0))) + 1.0 / np.log(np.e + np.sum(np.abs(x), axis=0)))


def f_one(t, x):
    return np.ones(np.shape(t))


def f_zero(t, x):
    return np.zeros(np.shape(t))


BUILTINS = {"exp_log": f_example, "one": f_one, "zero": f_zero}


def load_table(path):
    """f(t) tabulated in a CSV with columns t,f (independent of u), linearly interpolated."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or "t" not in data.dtype.names or "f" not in data.dtype.names:
        raise ValidationError(f"table {path} needs columns t,f", "f")
    ts, fs = np.atleast_1d(data["t"]), np.atleast_1d(data["f"])

    def f(t, x):
        return np.interp(t, ts, fs)
    return f


def resolve_f(spec):
    if callable(spec):
        return spec
    if isinstance(spec, str) and spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTINS:
            raise ValidationError(f"unknown builtin nonlinearity {name!r}; have {sorted(BUILTINS)}", "f")
        return BUILTINS[name]
    if isinstance(spec, str) and spec.startswith("table:"):
        return load_table(spec.split(":", 1)[1])
    raise ValidationError("f must be 'builtin:<name>' or 'table:<file>'", "f")


class NonlinearProblem:
    def __init__(self, space, domain, M, f, q_list=(), I1=None, panels=8):
        self.space, self.domain, self.M = space, domain, float(M)
        self.f = resolve_f(f)
        self.q_list = tuple(sorted(set(q_list)))
        self.I1 = I1
        self.mesh = Mesh(domain, panels)
        self.green = build_green(space, domain, M)
        self._op = None
        self._envelope = None

    @property
    def operator(self):
        if self._op is None:
            self._op = IntegralOperator(self.green, self.mesh)
        return self._op

    @property
    def envelope(self):
        if self._envelope is None:
            self._envelope = build_envelope(self.green, self.q_list, self.I1)
        return self._envelope

    def zero(self):
        return SampledFunction(self.mesh, np.zeros((self.space.n, len(self.mesh.points))))


def apply_L(problem, u):
    mesh = problem.mesh
    with np.errstate(all="raise"):
        F = np.asarray(problem.f(mesh.nodes, u.values[:, mesh.node_index]), float)
    if not np.all(np.isfinite(F)):
        raise FloatingPointError("nonlinearity returned non-finite values")
    if np.any(F < 0):
        raise ValidationError("nonlinearity must be nonnegative", "f")
    return SampledFunction(mesh, problem.operator(F))


# ---------------------------------------------------------------- cone membership

@dataclass
class ConeReport:
    margins: dict  # condition -> worst (lhs - rhs) over all sample points
    interior_margins: dict  # same, excluding the two endpoints
    tolerance: float

    @property
    def member(self):
        return all(v >= -self.tolerance for v in self.margins.values())

    @property
    def violated(self):
        return [k for k, v in self.margins.items() if v < -self.tolerance]

    def to_json(self):
        return {"member": self.member, "violated": self.violated, "margins": self.margins,
                "interior_margins": self.interior_margins, "tolerance": self.tolerance}


def cone_membership(u, envelope, q_list=None, rel_tol=1e-10):
    t = u.t
    vals = u.values
    q_list = sorted(envelope.sign_blocks) if q_list is None else sorted(q_list)
    interior = (t > t[0]) & (t < t[-1])
    conds = {}
    conds["u >= 0"] = vals[0]
    for q in q_list:
        case, sgn = envelope.sign_blocks[q]
        if case == CASE_A:
            conds[f"(-1)^d_{q} u^({q}) >= 0"] = sgn * vals[q]
        elif case == CASE_C:
            conds[f"(-1)^(n-{q}) u^({q}) >= 0"] = sgn * vals[q]
        else:
            conds[f"u^({q}) >= 0"] = sgn * vals[q]
    norm = float(np.max(np.abs(vals[0])))
    if norm > 0:
        conds["u >= k1(t)/k2 |u|"] = vals[0] - envelope.lower(t) / envelope.k2_max * norm
    else:
        conds["u >= k1(t)/k2 |u|"] = np.zeros_like(t)
    for q in q_list:
        case, sgn = envelope.sign_blocks[q]
        if case != CASE_A:
            continue
        nq = float(np.max(np.abs(vals[q])))
        name = f"(-1)^d_{q} u^({q}) >= k1_{q}(t)/k2_{q} |u^({q})|"
        if nq > 0:
            conds[name] = sgn * vals[q] - envelope.lower(t, q) / envelope.k2_q_max[q] * nq
        else:
            conds[name] = np.zeros_like(t)
    scale = max(u.sup_norm(), 1e-300)
    margins = {k: float(np.min(v)) for k, v in conds.items()}
    inner = {k: float(np.min(v[interior])) for k, v in conds.items()}
    return ConeReport(margins, inner, rel_tol * scale)


# ---------------------------------------------------------------- Picard

@dataclass
class PicardResult:
    u: SampledFunction
    iterations: int
    converged: bool
    residual: float
    history: list
    cone: ConeReport | None

    def to_json(self):
        return {"iterations": self.iterations, "converged": self.converged,
                "residual": self.residual, "sup_norm": self.u.sup_norm(),
                "cone": None if self.cone is None else self.cone.to_json()}


def picard_solve(problem, u0=None, max_iter=500, tol=1e-12, damping=1.0, check_cone=True):
    if not 0 < damping <= 1:
        raise ValidationError("damping must lie in (0, 1]", "damping")
    u = apply_L(problem, problem.zero()) if u0 is None else u0
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = apply_L(problem, u)
        step = float(np.max(np.abs(new.values - u.values)))
        history.append(step)
        u = SampledFunction(problem.mesh, (1 - damping) * u.values + damping * new.values)
        if step < tol:
            converged = True
            break
    residual = float(np.max(np.abs(u.values - apply_L(problem, u).values)))
    cone = cone_membership(u, problem.envelope, problem.q_list) if check_cone else None
    return PicardResult(u, it, converged, residual, history, cone)


def dump_solution(u, path):
    n = u.values.shape[0]
    header = ["t", "u"] + ["u" + "'" * d if d < 4 else f"u({d})" for d in range(1, n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, t in enumerate(u.t):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in u.values[:, i]])


def growth_diagnostic(f, n, domain, radii=(1e-6, 1e-4, 1e-2, 1e2, 1e4, 1e6), samples=51):
    """min/max over t of f(t, x)/|x|_1 along x = r (1, ..., 1); trends only, not a proof."""
    f = resolve_f(f)
    t = np.linspace(domain.a, domain.b, samples)
    out = []
    for r in radii:
        x = np.full((n, samples), r)
        ratio = f(t, x) / (n * r)
        out.append({"radius": r, "min_ratio": float(np.min(ratio)), "max_ratio": float(np.max(ratio))})
    return out
