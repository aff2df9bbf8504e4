"""Index-set algebra for two-point boundary conditions.

A space X_sigma^epsilon of order n is stored as two sorted tuples of
derivative orders: ``left`` (vanishing at a) and ``right`` (vanishing at b).
Everything here is exact integer bookkeeping; no floating point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import DegenerateSpaceError, NotApplicableError, ValidationError

CASE_A = "CaseA"
CASE_B = "CaseB"
CASE_C = "CaseC"
NO_CONSTANT_SIGN = "NoConstantSign"


def _is_canonical(seq, n):
    # already a strictly increasing tuple of ints inside [0, n)
    if type(seq) is not tuple or type(n) is not int or n < 1:
        return False
    prev = -1
    for x in seq:
        if type(x) is not int or x <= prev:
            return False
        prev = x
    return prev < n


def _fmt(seq):
    return "{" + ",".join(str(x) for x in seq) + "}"


@dataclass(frozen=True)
class TwoPointSpace:
    """Boundary conditions u^(i)(a) = 0 for i in left, u^(j)(b) = 0 for j in right."""

    n: int
    left: tuple
    right: tuple
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if _is_canonical(self.left, self.n) and _is_canonical(self.right, self.n):
            return
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}", "n")
        for name in ("left", "right"):
            raw = getattr(self, name)
            try:
                vals = [int(x) for x in raw]
            except (TypeError, ValueError):
                raise ValidationError(f"{name} must be a list of integers", name) from None
            if any(int(x) != x for x in raw):
                raise ValidationError(f"{name} must contain integers", name)
            if len(set(vals)) != len(vals):
                raise ValidationError(f"duplicate entry in {name}: {list(raw)}", name)
            bad = [x for x in vals if not 0 <= x < self.n]
            if bad:
                raise ValidationError(
                    f"{name} entries must lie in [0, {self.n - 1}], got {bad}", name
                )
            object.__setattr__(self, name, tuple(sorted(vals)))

    @property
    def k(self):
        return len(self.left)

    @property
    def is_complete(self):
        return len(self.left) + len(self.right) == self.n

    def name(self):
        return f"X_{_fmt(self.left)}^{_fmt(self.right)}"

    def to_json(self):
        return {"n": self.n, "sigma": list(self.left), "epsilon": list(self.right)}

    def __str__(self):
        return self.label or self.name()


def _require_complete(space):
    if not space.is_complete:
        raise ValidationError(
            f"{space.name()} has {space.k + len(space.right)} conditions, expected n={space.n}"
        )


def _check_q(space, q):
    if isinstance(q, bool) or not isinstance(q, int) or not 1 <= q <= space.n - 1:
        raise ValidationError(f"q must be an integer in [1, {space.n - 1}], got {q!r}", "q")


def check_na(space):
    """Counting condition: for each h < n, at least h conditions of order < h."""
    _require_complete(space)
    for h in range(1, space.n):
        count = sum(1 for x in space.left if x < h) + sum(1 for x in space.right if x < h)
        if count < h:
            return False
    return True


def _min_missing(seq, n):
    present = set(seq)
    for i in range(n):
        if i not in present:
            return i
    return n


def alpha_beta(space):
    """Smallest derivative order not constrained at a, and at b."""
    return _min_missing(space.left, space.n), _min_missing(space.right, space.n)


def adjoint(space):
    """Boundary conditions of the adjoint problem (reflected complements)."""
    _require_complete(space)
    n = space.n
    left = sorted(n - 1 - x for x in range(n) if x not in space.left)
    right = sorted(n - 1 - x for x in range(n) if x not in space.right)
    return TwoPointSpace(n, tuple(left), tuple(right))


def eta_gamma(space):
    return alpha_beta(adjoint(space))


@dataclass(frozen=True)
class DerivativeIndexData:
    """Conditions met by the q-th t-derivative of the Green's function.

    j, r, z, h are 1-based positions, as in the usual indexing mu_1 < ... < mu_k.
    """

    n: int
    q: int
    mu: tuple
    rho: tuple
    alpha_q: int
    beta_q: int
    j: int | None
    r: int | None
    z: int | None
    h: int | None
    c_q: int
    d_q: int
    sign_case: str

    @property
    def space(self):
        return TwoPointSpace(self.n, self.mu, self.rho)

    @property
    def mu_z(self):
        return None if self.z is None else self.mu[self.z - 1]

    @property
    def rho_h(self):
        return None if self.h is None else self.rho[self.h - 1]


def _shift(seq, q, n):
    return tuple(sorted(x - q if x >= q else x - q + n for x in seq))


def classify(c_q, d_q, n, q):
    if c_q + d_q != n - q:
        return NO_CONSTANT_SIGN
    if c_q >= 1 and d_q >= 1:
        return CASE_A
    return CASE_B if d_q == 0 else CASE_C


def derivative_space(space, q):
    _require_complete(space)
    _check_q(space, q)
    n, k = space.n, space.k
    mu = _shift(space.left, q, n)
    rho = _shift(space.right, q, n)
    alpha_q = _min_missing(mu, n)
    beta_q = _min_missing(rho, n)
    # A_q: positions (1-based) of sigma_i >= q; it is a suffix of the sorted set
    a_pos = [i + 1 for i, x in enumerate(space.left) if x >= q]
    b_pos = [i + 1 for i, x in enumerate(space.right) if x >= q]
    j = a_pos[0] if a_pos else None
    r = b_pos[0] if b_pos else None
    z = k - (j - 1) if j is not None else None
    h = (n - k) - (r - 1) if r is not None else None
    c_q = sum(1 for x in space.left if 0 <= x - q <= n - q - 1)
    d_q = sum(1 for x in space.right if 0 <= x - q <= n - q - 1)
    return DerivativeIndexData(
        n=n, q=q, mu=mu, rho=rho, alpha_q=alpha_q, beta_q=beta_q,
        j=j, r=r, z=z, h=h, c_q=c_q, d_q=d_q, sign_case=classify(c_q, d_q, n, q),
    )


def phi(space, q=1):
    """The space satisfied by d^q/dt^q of the Green's function."""
    return derivative_space(space, q).space


def adjoint_cut_points(space, q):
    """(l, p): l = max C_q on the adjoint left set, p = max D_q on the adjoint right set.

    C_q = {i : tau_i + q <= n-1}; 0 when the set is empty.
    """
    _check_q(space, q)
    adj = adjoint(space)
    n = space.n
    l = sum(1 for x in adj.left if x + q <= n - 1)
    p = sum(1 for x in adj.right if x + q <= n - 1)
    return l, p


def adjoint_derivative_space(space, q):
    """(tau^q, delta^q) built directly from the adjoint sets, without using phi."""
    _require_complete(space)
    _check_q(space, q)
    n = space.n
    adj = adjoint(space)
    l, p = adjoint_cut_points(space, q)
    tau, delta = adj.left, adj.right
    tau_q = tuple(x + q - n for x in tau[l:]) + tuple(x + q for x in tau[:l])
    delta_q = tuple(x + q - n for x in delta[p:]) + tuple(x + q for x in delta[:p])
    return TwoPointSpace(n, tau_q, delta_q)


@dataclass(frozen=True)
class AuxSpaces:
    x2: TwoPointSpace
    x3: TwoPointSpace
    x4: TwoPointSpace
    x5: TwoPointSpace
    x2_adj: TwoPointSpace
    x4_adj: TwoPointSpace


def _without(seq, pos):
    return seq[: pos - 1] + seq[pos:]


def _with(seq, value, what):
    if value in seq:
        raise DegenerateSpaceError(f"{what}: index {value} already present in {_fmt(seq)}")
    return tuple(sorted(seq + (value,)))


def aux_spaces(space, q):
    d = derivative_space(space, q)
    if d.sign_case != CASE_A:
        raise NotApplicableError(f"auxiliary spaces need c_q, d_q >= 1 (got {d.sign_case})")
    n = space.n
    adj = adjoint(space)
    eta, gamma = alpha_beta(adj)
    mu_cut = _without(d.mu, d.z)
    rho_cut = _without(d.rho, d.h)
    tag = f"q={q} of {space.name()}"

    def make(left, right, name):
        s = TwoPointSpace(n, left, right)
        return TwoPointSpace(n, s.left, s.right, label=f"{name}[{tag}] {s.name()}")

    return AuxSpaces(
        x2=make(mu_cut, _with(d.rho, d.beta_q, "X2"), "X2"),
        x3=make(_with(mu_cut, d.alpha_q, "X3"), d.rho, "X3"),
        x4=make(_with(d.mu, d.alpha_q, "X4"), rho_cut, "X4"),
        x5=make(d.mu, _with(rho_cut, d.beta_q, "X5"), "X5"),
        x2_adj=make(_with(adj.left, eta, "X2*"), _without(adj.right, d.z), "X2*"),
        x4_adj=make(_without(adj.left, d.h), _with(adj.right, gamma, "X4*"), "X4*"),
    )


def all_spaces(n, complete=True):
    """Every pair of index sets of order n (with |left|+|right| = n if complete)."""
    orders = range(n)
    for k in range(0, n + 1):
        right_sizes = [n - k] if complete else range(0, n + 1)
        for left in itertools.combinations(orders, k):
            for size in right_sizes:
                for right in itertools.combinations(orders, size):
                    yield TwoPointSpace(n, left, right)


def two_point_spaces(n):
    """Complete spaces with 1 <= k <= n-1."""
    return (s for s in all_spaces(n) if 1 <= s.k <= n - 1)
