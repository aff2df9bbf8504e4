from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from greensign.combinatorics import (
    CASE_A, CASE_B, CASE_C, NO_CONSTANT_SIGN, TwoPointSpace, adjoint, adjoint_cut_points,
    adjoint_derivative_space, all_spaces, alpha_beta, aux_spaces, check_na, classify,
    derivative_space, eta_gamma, phi, two_point_spaces,
)
from greensign.errors import ValidationError


def X(n, left, right):
    return TwoPointSpace(n, tuple(left), tuple(right))


@st.composite
def spaces(draw, n_min=2, n_max=9):
    n = draw(st.integers(n_min, n_max))
    k = draw(st.integers(1, n - 1))
    left = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
    right = draw(st.lists(st.integers(0, n - 1), min_size=n - k, max_size=n - k, unique=True))
    return X(n, left, right)


# -------------------------------------------------------------- construction

def test_sorted_on_construction():
    s = X(4, [1, 0], [3, 1])
    assert s.left == (0, 1) and s.right == (1, 3)
    assert s.name() == "X_{0,1}^{1,3}"
    assert s.to_json() == {"n": 4, "sigma": [0, 1], "epsilon": [1, 3]}


def test_duplicates_rejected_with_field():
    with pytest.raises(ValidationError) as err:
        X(4, [0, 0], [1, 3])
    assert err.value.field == "left"
    with pytest.raises(ValidationError) as err:
        X(4, [0, 1], [3, 3])
    assert err.value.field == "right"


def test_out_of_range_rejected():
    with pytest.raises(ValidationError):
        X(4, [0, 4], [1, 3])
    with pytest.raises(ValidationError):
        X(4, [-1], [1, 2, 3])


def test_label_ignored_in_equality():
    assert TwoPointSpace(4, (0, 1), (1, 3), label="a") == TwoPointSpace(4, (0, 1), (1, 3))


def test_space_counts():
    for n in range(2, 7):
        assert len(list(two_point_spaces(n))) == sum(comb(n, k) ** 2 for k in range(1, n))


# -------------------------------------------------------------- worked examples

def test_phi_chain_order_five():
    s = X(5, [0, 2, 4], [0, 2])
    chain = []
    for _ in range(5):
        s = phi(s)
        chain.append(s.name())
    assert chain == ["X_{1,3,4}^{1,4}", "X_{0,2,3}^{0,3}", "X_{1,2,4}^{2,4}",
                     "X_{0,1,3}^{1,3}", "X_{0,2,4}^{0,2}"]


def test_zero_eigenvalue_along_chain():
    # zero is an eigenvalue exactly in the second and fourth spaces of the chain
    s = X(5, [0, 2, 4], [0, 2])
    verdicts = []
    for _ in range(5):
        verdicts.append(check_na(s))
        s = phi(s)
    assert verdicts == [True, False, True, False, True]


def test_adjoint_diagram_order_four():
    s = X(4, [0, 2], [1, 2])
    chain = [s] + [phi(s, q) for q in range(1, 4)]
    top = [x.name() for x in chain]
    bottom = [adjoint(x).name() for x in chain]
    assert top == ["X_{0,2}^{1,2}", "X_{1,3}^{0,1}", "X_{0,2}^{0,3}", "X_{1,3}^{2,3}"]
    assert bottom == ["X_{0,2}^{0,3}", "X_{1,3}^{0,1}", "X_{0,2}^{1,2}", "X_{1,3}^{2,3}"]
    for q in range(1, 4):
        assert adjoint_derivative_space(s, q) == adjoint(phi(s, q))


def test_clamped_example_indices():
    s = X(4, [0, 1, 2], [2])
    assert alpha_beta(s) == (3, 0)
    assert adjoint(s) == X(4, [0], [0, 2, 3])
    assert eta_gamma(s) == (1, 1)


def test_z_h_for_first_derivative():
    d = derivative_space(X(4, [1, 3], [0, 1]), 1)
    assert d.space == X(4, [0, 2], [0, 3])
    assert (d.z, d.h) == (2, 1)
    assert (d.c_q, d.d_q, d.sign_case) == (2, 1, CASE_A)


def test_lono_example_data():
    s = X(4, [0, 1], [1, 3])
    d = derivative_space(s, 1)
    assert (d.mu, d.rho, d.c_q, d.d_q, d.sign_case) == ((0, 3), (0, 2), 1, 2, CASE_A)
    assert eta_gamma(s) == (2, 0)
    aux = aux_spaces(s, 1)
    assert aux.x2 == X(4, [3], [0, 1, 2])
    assert aux.x4 == X(4, [0, 1, 3], [0])
    assert derivative_space(s, 2).sign_case == NO_CONSTANT_SIGN
    assert derivative_space(s, 3).sign_case == CASE_C


def test_case_b_and_c_examples():
    s = X(4, [2, 3], [0, 1])
    assert derivative_space(s, 2).sign_case == CASE_B
    assert derivative_space(s, 3).sign_case == CASE_B
    s6 = X(6, [0, 2], [1, 3, 4, 5])
    for q in (3, 4, 5):
        d = derivative_space(s6, q)
        assert d.sign_case == CASE_C and d.c_q == 0 and d.d_q == 6 - q


def test_classify_rules():
    assert classify(1, 2, 4, 1) == CASE_A
    assert classify(3, 0, 4, 1) == CASE_B
    assert classify(0, 3, 4, 1) == CASE_C
    assert classify(1, 1, 4, 1) == NO_CONSTANT_SIGN


def test_complete_space_required():
    with pytest.raises(ValidationError):
        check_na(X(4, [0], [1, 2]))


# -------------------------------------------------------------- properties

@settings(max_examples=300, deadline=None)
@given(spaces())
def test_phi_has_period_n(s):
    x = s
    for _ in range(s.n):
        x = phi(x)
    assert x == s


@settings(max_examples=300, deadline=None)
@given(spaces())
def test_adjoint_is_involution_and_swaps_indices(s):
    adj = adjoint(s)
    assert adjoint(adj) == s
    assert eta_gamma(s) == alpha_beta(adj)
    eta, gamma = eta_gamma(s)
    assert eta == s.n - 1 - s.left[-1] and gamma == s.n - 1 - s.right[-1]


@settings(max_examples=300, deadline=None)
@given(spaces())
def test_diagram_commutes(s):
    adj = adjoint(s)
    for q in range(1, s.n):
        assert adjoint_derivative_space(s, q) == adjoint(derivative_space(s, q).space)
        assert phi(adjoint(derivative_space(s, q).space), q) == adj


@settings(max_examples=300, deadline=None)
@given(spaces())
def test_cut_indices(s):
    n = s.n
    eta, gamma = eta_gamma(s)
    for q in range(1, n):
        d = derivative_space(s, q)
        if check_na(s):
            assert d.c_q + d.d_q <= n - q
        if d.sign_case != CASE_A:
            continue
        assert d.mu_z + q + eta == n - 1
        assert d.rho_h + q + gamma == n - 1
        l_, p = adjoint_cut_points(s, q)
        assert (d.z, d.h) == (p, l_)


@settings(max_examples=200, deadline=None)
@given(spaces())
def test_aux_spaces_have_right_sizes(s):
    for q in range(1, s.n):
        d = derivative_space(s, q)
        if d.sign_case != CASE_A:
            continue
        aux = aux_spaces(s, q)
        for x in (aux.x2, aux.x3, aux.x4, aux.x5):
            assert x.is_complete
        assert aux.x2.k == s.k - 1 and aux.x4.k == s.k + 1


def test_exhaustive_small_orders():
    count = 0
    for n in range(2, 7):
        for s in all_spaces(n):
            if not 1 <= s.k <= n - 1:
                continue
            count += 1
            x = s
            for _ in range(n):
                x = phi(x)
            assert x == s
            assert adjoint(adjoint(s)) == s
    assert count == sum(comb(2 * n, n) - 2 for n in range(2, 7))
