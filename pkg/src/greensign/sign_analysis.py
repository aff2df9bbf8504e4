"""Constant-sign intervals for d^q/dt^q g_M and their grid verification."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .combinatorics import (
    CASE_A, CASE_B, CASE_C, NO_CONSTANT_SIGN, alpha_beta, aux_spaces, check_na,
    derivative_space, _check_q,
)
from .errors import GreensignError, NotApplicableError, PreconditionError, ValidationError
from .green import build_green, interior_grid
from .spectral import FIRST_NEGATIVE, FIRST_POSITIVE, EigenResult, find_first

NOT_COVERED = "NotCoveredByTheorem"
STRONGLY_POSITIVE = "StronglyPositive"
STRONGLY_NEGATIVE = "StronglyNegative"
NONNEGATIVE = "Nonnegative"
NONPOSITIVE = "Nonpositive"

STRICT = "StrictSignConfirmed"
WEAK = "WeakSignConfirmed"
VIOLATED = "SignViolated"
INCONCLUSIVE = "Inconclusive"


class EigenvalueNotFound(GreensignError):
    def __init__(self, name, space, result):
        super().__init__(
            f"{name}: no {result.direction} eigenvalue of {space.name()} with m <= {result.m_max:g}"
        )
        self.result = result


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    lower_open: bool
    upper_open: bool

    def contains(self, x):
        lo = x > self.lower if self.lower_open else x >= self.lower
        hi = x < self.upper if self.upper_open else x <= self.upper
        return lo and hi

    def to_json(self):
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"lower": enc(self.lower), "upper": enc(self.upper),
                "lower_open": self.lower_open, "upper_open": self.upper_open}

    def __str__(self):
        return (("(" if self.lower_open else "[") + f"{self.lower:.10g}, {self.upper:.10g}"
                + (")" if self.upper_open else "]"))


@dataclass
class SignPrediction:
    q: int
    case: str
    sign: str | None
    interval: Interval | None
    provenance: list = field(default_factory=list)
    necessary_only: bool = False
    note: str = ""

    def to_json(self):
        prov = []
        for name, space, res in self.provenance:
            entry = {"name": name, "space": space.to_json(), "label": str(space)}
            entry.update(res.to_json() if res is not None else {"lambda": None, "note": "no eigenvalues"})
            prov.append(entry)
        return {
            "q": self.q, "case": self.case, "sign": self.sign,
            "interval": self.interval.to_json() if self.interval else None,
            "necessary_only": self.necessary_only, "note": self.note, "provenance": prov,
        }


class _Eigs:
    """Collects first eigenvalues with their provenance."""

    def __init__(self, domain, m_max=None, scan_points=2000):
        self.domain = domain
        self.m_max = m_max
        self.scan_points = scan_points
        self.provenance = []

    def get(self, name, space, direction):
        if space.k in (0, space.n):
            # all conditions at one endpoint: an initial value problem, never singular
            self.provenance.append((name, space, None))
            return math.inf if direction == FIRST_POSITIVE else -math.inf
        res = find_first(space, self.domain, direction, self.m_max, self.scan_points)
        if not isinstance(res, EigenResult):
            raise EigenvalueNotFound(name, space, res)
        self.provenance.append((name, space, res))
        return res.lam


def _lambda1_direction(space):
    return FIRST_NEGATIVE if (space.n - space.k) % 2 == 0 else FIRST_POSITIVE


def predict_interval(space, domain, q, m_max=None, scan_points=2000):
    if not check_na(space):
        raise PreconditionError(f"{space.name()} fails the counting condition (N_a)")
    _check_q(space, q)
    n, k = space.n, space.k
    d = derivative_space(space, q)
    if d.sign_case == NO_CONSTANT_SIGN:
        return SignPrediction(q, NO_CONSTANT_SIGN, None, None,
                              note="c_q + d_q < n - q: no M gives constant sign")
    eig = _Eigs(domain, m_max, scan_points)
    even = (n - k) % 2 == 0
    lam1 = eig.get("lambda_1", space, _lambda1_direction(space))

    if d.sign_case == CASE_B:
        iv = Interval(lam1, 0.0, True, False) if even else Interval(0.0, lam1, False, True)
        return SignPrediction(q, CASE_B, NONNEGATIVE, iv, eig.provenance)
    if d.sign_case == CASE_C:
        sign = NONNEGATIVE if (n - q) % 2 == 0 else NONPOSITIVE
        iv = Interval(lam1, 0.0, True, False) if even else Interval(0.0, lam1, False, True)
        return SignPrediction(q, CASE_C, sign, iv, eig.provenance)

    aux = aux_spaces(space, q)
    parity = n - q - d.c_q
    sign = STRONGLY_POSITIVE if parity % 2 == 0 else STRONGLY_NEGATIVE
    if 2 <= k <= n - 2:
        if even:
            lam2 = eig.get("lambda_2^q", aux.x2, FIRST_POSITIVE)
            lam4 = eig.get("lambda_4^q", aux.x4, FIRST_POSITIVE)
            iv = Interval(lam1, min(lam2, lam4), True, False)
        else:
            lam2 = eig.get("lambda_2^q", aux.x2, FIRST_NEGATIVE)
            lam4 = eig.get("lambda_4^q", aux.x4, FIRST_NEGATIVE)
            iv = Interval(max(lam2, lam4), lam1, False, True)
        return SignPrediction(q, CASE_A, sign, iv, eig.provenance)
    if k == 1 and n > 2:
        if n % 2 == 1:
            lam2 = eig.get("lambda_2^q", aux.x2, FIRST_POSITIVE)
            iv = Interval(lam1, lam2, True, False)
        else:
            lam2 = eig.get("lambda_2^q", aux.x2, FIRST_NEGATIVE)
            iv = Interval(lam2, lam1, False, True)
        return SignPrediction(q, CASE_A, sign, iv, eig.provenance)
    if k == n - 1 and parity == 1:
        lam2 = eig.get("lambda_2^q", aux.x2, FIRST_NEGATIVE)
        iv = Interval(lam2, lam1, False, True)
        return SignPrediction(q, CASE_A, STRONGLY_NEGATIVE, iv, eig.provenance)
    return SignPrediction(q, NOT_COVERED, None, None, eig.provenance,
                          note=f"k={k}, n-q-c_q={parity}: branch not covered")


def nonexistence_check(space, q):
    """Sign that no M can produce, when the boundary index sits at its extreme."""
    d = derivative_space(space, q)
    if d.sign_case != CASE_A:
        raise NotApplicableError("nonexistence test needs c_q, d_q >= 1 and c_q + d_q = n - q")
    n = space.n
    if space.left[-1] == q + d.c_q - 1 or space.right[-1] == q + d.d_q - 1:
        return STRONGLY_NEGATIVE if (n - q - d.c_q) % 2 == 0 else STRONGLY_POSITIVE
    return None


def necessary_interval(space, domain, q, m_max=None, scan_points=2000):
    d = derivative_space(space, q)
    if d.sign_case != CASE_A:
        raise NotApplicableError("necessary interval needs c_q, d_q >= 1 and c_q + d_q = n - q")
    if d.mu_z == d.z - 1 or d.rho_h == d.h - 1:
        raise NotApplicableError("needs mu_z != z-1 and rho_h != h-1")
    n, k = space.n, space.k
    aux = aux_spaces(space, q)
    eig = _Eigs(domain, m_max, scan_points)
    lam1 = eig.get("lambda_1", space, _lambda1_direction(space))
    odd_parity = (n - q - d.c_q) % 2 == 1
    if (n - k) % 2 == 0:
        lam3 = eig.get("lambda_3^q", aux.x3, FIRST_NEGATIVE)
        lam5 = eig.get("lambda_5^q", aux.x5, FIRST_NEGATIVE)
        iv = Interval(max(lam3, lam5), lam1, False, True)
        sign = NONNEGATIVE if odd_parity else NONPOSITIVE
    else:
        lam3 = eig.get("lambda_3^q", aux.x3, FIRST_POSITIVE)
        lam5 = eig.get("lambda_5^q", aux.x5, FIRST_POSITIVE)
        iv = Interval(lam1, min(lam3, lam5), True, False)
        sign = NONPOSITIVE if odd_parity else NONNEGATIVE
    return SignPrediction(q, CASE_A, sign, iv, eig.provenance, necessary_only=True,
                          note="necessary condition only")


@dataclass
class ZeroFreeInterval:
    problem: object  # TwoPointSpace with n-1 conditions
    interval: Interval
    provenance: list

    def to_json(self):
        return {"problem": self.problem.to_json(), "interval": self.interval.to_json(),
                "provenance": [{"name": nm, "space": sp.to_json(),
                                "lambda": None if r is None else r.lam} for nm, sp, r in self.provenance]}


def zero_free_intervals(space, domain, q, m_max=None, scan_points=2000):
    """M-ranges where the solutions of the two (n-1)-condition problems have no zero."""
    from .combinatorics import TwoPointSpace, _without
    d = derivative_space(space, q)
    if d.sign_case != CASE_A:
        raise NotApplicableError("zero-free intervals need c_q, d_q >= 1 and c_q + d_q = n - q")
    n, k = space.n, space.k
    aux = aux_spaces(space, q)
    inf = math.inf
    even = (n - k) % 2 == 0
    dir1 = _lambda1_direction(space)

    # first problem: mu without mu_z on the left, rho on the right
    e1 = _Eigs(domain, m_max, scan_points)
    free_z = d.mu_z != d.z - 1
    if even:
        if k > 1:
            lo = e1.get("lambda_3^q", aux.x3, FIRST_NEGATIVE) if free_z else e1.get("lambda_1", space, dir1)
            iv1 = Interval(lo, e1.get("lambda_2^q", aux.x2, FIRST_POSITIVE), False, False)
        else:
            lo = e1.get("lambda_3^q", aux.x3, FIRST_NEGATIVE) if free_z else e1.get("lambda_1", space, dir1)
            iv1 = Interval(lo, inf, False, True)
    else:
        if k > 1:
            hi = e1.get("lambda_3^q", aux.x3, FIRST_POSITIVE) if free_z else e1.get("lambda_1", space, dir1)
            iv1 = Interval(e1.get("lambda_2^q", aux.x2, FIRST_NEGATIVE), hi, False, False)
        else:
            hi = e1.get("lambda_3^q", aux.x3, FIRST_POSITIVE) if free_z else e1.get("lambda_1", space, dir1)
            iv1 = Interval(-inf, hi, True, False)

    # second problem: mu on the left, rho without rho_h on the right
    e2 = _Eigs(domain, m_max, scan_points)
    free_h = d.rho_h != d.h - 1
    if even:
        lo = e2.get("lambda_5^q", aux.x5, FIRST_NEGATIVE) if free_h else e2.get("lambda_1", space, dir1)
        iv2 = Interval(lo, e2.get("lambda_4^q", aux.x4, FIRST_POSITIVE), False, False)
    elif k < n - 1:
        hi = e2.get("lambda_5^q", aux.x5, FIRST_POSITIVE) if free_h else e2.get("lambda_1", space, dir1)
        iv2 = Interval(e2.get("lambda_4^q", aux.x4, FIRST_NEGATIVE), hi, False, False)
    else:
        hi = e2.get("lambda_5^q", aux.x5, FIRST_POSITIVE) if free_h else e2.get("lambda_1", space, dir1)
        iv2 = Interval(-inf, hi, True, False)

    p1 = TwoPointSpace(n, _without(d.mu, d.z), d.rho)
    p2 = TwoPointSpace(n, d.mu, _without(d.rho, d.h))
    return ZeroFreeInterval(p1, iv1, e1.provenance), ZeroFreeInterval(p2, iv2, e2.provenance)


@dataclass
class SignReport:
    q: int
    M: float
    grid: int
    min_value: float
    max_value: float
    endpoint_a: np.ndarray = field(repr=False)
    endpoint_b: np.ndarray = field(repr=False)
    verdict: str
    sign: str | None
    values: np.ndarray = field(repr=False, default=None)

    def to_json(self):
        return {
            "q": self.q, "M": self.M, "grid": self.grid, "min": self.min_value,
            "max": self.max_value, "verdict": self.verdict, "sign": self.sign,
            "endpoint_a_min": float(np.min(self.endpoint_a)),
            "endpoint_a_max": float(np.max(self.endpoint_a)),
            "endpoint_b_min": float(np.min(self.endpoint_b)),
            "endpoint_b_max": float(np.max(self.endpoint_b)),
        }


STRICT_MARGIN = 1e-10
WEAK_MARGIN = 1e-9


def _sign_of(arr, margin):
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    if scale == 0.0:
        return 0, False, False
    tol = margin * scale
    pos, neg = bool(np.any(arr > tol)), bool(np.any(arr < -tol))
    strict = bool(np.all(np.abs(arr) > tol))
    s = 1 if pos and not neg else (-1 if neg and not pos else (2 if pos else 0))
    return s, strict, pos and neg


def verify_sign(space, domain, q, M, grid=101, expected=None, green=None):
    if grid < 3:
        raise ValidationError("grid must be at least 3", "grid")
    n = space.n
    if not 0 <= q <= n - 1:
        raise ValidationError(f"q must lie in [0, {n - 1}]", "q")
    g = green if green is not None else build_green(space, domain, M)
    pts = interior_grid(domain, grid)
    vals = g.grid(q, pts, pts, side="+")
    flat = vals.ravel()
    if q == n - 1:
        flat = np.concatenate([flat, g.pairs(q, pts, pts, side="-")])
    if q == 0:
        alpha, beta = alpha_beta(space)
    else:
        dq = derivative_space(space, q)
        alpha, beta = dq.alpha_q, dq.beta_q
    end_a = g.grid(q + alpha, [domain.a], pts)[0]
    end_b = (-1) ** beta * g.grid(q + beta, [domain.b], pts)[0]

    s_in, strict_in, mixed_in = _sign_of(flat, STRICT_MARGIN)
    s_a, strict_a, mixed_a = _sign_of(end_a, STRICT_MARGIN)
    s_b, strict_b, mixed_b = _sign_of(end_b, STRICT_MARGIN)
    weak = expected in (NONNEGATIVE, NONPOSITIVE)
    want = {STRONGLY_POSITIVE: 1, NONNEGATIVE: 1, STRONGLY_NEGATIVE: -1, NONPOSITIVE: -1}.get(expected)

    detected = None
    if mixed_in:
        verdict = VIOLATED
    elif strict_in and strict_a and strict_b and s_in == s_a == s_b and s_in in (1, -1):
        verdict = STRICT
        detected = STRONGLY_POSITIVE if s_in == 1 else STRONGLY_NEGATIVE
        if want is not None and want != s_in:
            verdict = VIOLATED
    elif weak:
        s_w, _, mixed_w = _sign_of(flat, WEAK_MARGIN)
        if mixed_w or (s_w in (1, -1) and s_w != want):
            verdict = VIOLATED
        elif s_w == want:
            verdict = WEAK
            detected = expected
        else:
            verdict = INCONCLUSIVE
    elif (mixed_a or mixed_b or (s_a in (1, -1) and s_in in (1, -1) and s_a != s_in)
          or (s_b in (1, -1) and s_in in (1, -1) and s_b != s_in)):
        verdict = VIOLATED
    elif want is not None and s_in in (1, -1) and s_in != want:
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return SignReport(q, float(M), grid, float(flat.min()), float(flat.max()),
                      end_a, end_b, verdict, detected, vals)


@dataclass
class MonotonicityCheck:
    direction: str  # "decreasing" or "increasing"
    pairs_checked: int
    violations: int
    worst: float

    @property
    def holds(self):
        return self.violations == 0

    def to_json(self):
        return {"direction": self.direction, "pairs_checked": self.pairs_checked,
                "violations": self.violations, "worst": self.worst, "holds": self.holds}


@dataclass
class SweepResult:
    reports: list
    monotonicity: MonotonicityCheck | None
    prediction: SignPrediction | None


def _threads():
    try:
        return max(1, int(os.environ.get("GREENSIGN_THREADS", "1")))
    except ValueError:
        return 1


def sweep(space, domain, q, Ms, grid=101, prediction=None):
    Ms = sorted(float(M) for M in Ms)
    if prediction is None:
        prediction = predict_interval(space, domain, q)

    def run(M):
        return verify_sign(space, domain, q, M, grid, expected=prediction.sign)

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, Ms))
    else:
        reports = [run(M) for M in Ms]

    mono = None
    if prediction.interval is not None and prediction.sign is not None:
        positive = prediction.sign in (STRONGLY_POSITIVE, NONNEGATIVE)
        even = (space.n - space.k) % 2 == 0
        decreasing = positive == even
        inside = [r for r in reports if prediction.interval.contains(r.M)]
        violations, worst = 0, 0.0
        for r1, r2 in zip(inside, inside[1:]):
            diff = r2.values - r1.values
            if not decreasing:
                diff = -diff
            scale = max(np.max(np.abs(r1.values)), np.max(np.abs(r2.values)))
            bad = diff > 1e-12 * scale
            violations += int(np.sum(bad))
            worst = max(worst, float(np.max(diff)))
        mono = MonotonicityCheck("decreasing" if decreasing else "increasing",
                                 max(0, len(inside) - 1), violations, worst)
    return SweepResult(list(zip(Ms, reports)), mono, prediction)
