import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greensign.combinatorics import TwoPointSpace, adjoint, check_na, two_point_spaces
from greensign.errors import EigenvalueCollisionError, ValidationError
from greensign.green import build_green, dump_grid, eval_q, interior_grid, verify_green
from greensign.ode_basis import UNIT, Domain

from oracles import central_diff, dg0_example, g0_example

LONO = TwoPointSpace(4, (0, 1), (1, 3))


@pytest.fixture(scope="module")
def g0():
    return build_green(LONO, UNIT, 0.0)


def test_point_values(g0):
    assert eval_q(g0, 0, 0.5, 0.25) == pytest.approx(0.0091145833333, abs=1e-12)
    assert eval_q(g0, 0, 0.25, 0.5) == pytest.approx(0.0091145833333, abs=1e-12)
    assert eval_q(g0, 1, 0.75, 0.5) == pytest.approx(0.03125, abs=1e-14)


def test_closed_forms_on_grid(g0):
    p = np.linspace(0, 1, 100)
    tt, ss = np.meshgrid(p, p, indexing="ij")
    assert np.max(np.abs(g0.grid(0, p, p) - g0_example(tt, ss))) < 1e-12
    assert np.max(np.abs(g0.grid(1, p, p) - dg0_example(tt, ss))) < 1e-12


def test_q_validation(g0):
    with pytest.raises(ValidationError):
        eval_q(g0, 4, 0.5, 0.5)
    with pytest.raises(ValueError):
        g0.pairs(3, 0.5, 0.5)


def test_jump_sides(g0):
    up = eval_q(g0, 3, 0.4, 0.4, side="+")
    down = eval_q(g0, 3, 0.4, 0.4, side="-")
    assert up - down == pytest.approx(1.0, abs=1e-12)
    assert eval_q(g0, 2, 0.4, 0.4) == pytest.approx(eval_q(g0, 2, 0.4, 0.4, side="-"), abs=1e-13)


@pytest.mark.parametrize("M", [0.0, 50.0, -50.0, 300.0, -1000.0, 1e4, -1e5, 1e-8])
def test_verification_report(M):
    rep = verify_green(build_green(LONO, UNIT, M))
    assert rep.passed, rep.to_json()
    assert rep.adjoint_error is not None


def test_eigenvalue_collision():
    lam1 = -(2.3650203724313177**4)
    with pytest.raises(EigenvalueCollisionError) as err:
        build_green(LONO, UNIT, lam1)
    assert err.value.det_magnitude < 1e-9


def test_zero_eigenvalue_without_counting_condition():
    bad = [s for s in two_point_spaces(4) if not check_na(s)]
    with pytest.raises(EigenvalueCollisionError):
        build_green(bad[0], UNIT, 0.0)


def test_s_derivative_matches_differences():
    g = build_green(LONO, UNIT, -20.0)
    h = 1e-3
    for t, s in [(0.7, 0.3), (0.2, 0.6), (0.9, 0.1)]:
        fd = central_diff(lambda x: g.pairs(0, t, x), s, h)
        assert -fd == pytest.approx(float(g.pairs(0, t, s, column=3)), abs=1e-9)
        fd2 = central_diff(lambda x: g.pairs(0, t, x, column=3), s, h)
        assert -fd2 == pytest.approx(float(g.pairs(0, t, s, column=2)), abs=1e-9)


def test_shifted_domain_scaling():
    # g on [a, a+L] equals L^(n-1) g on [0, 1] at the rescaled points, with M scaled by L^n
    L, a = 2.0, -0.5
    big = build_green(LONO, Domain(a, a + L), 3.0 / L**4)
    small = build_green(LONO, UNIT, 3.0)
    assert big(a + L * 0.6, a + L * 0.3) == pytest.approx(L**3 * small(0.6, 0.3), rel=1e-12)


@st.composite
def admissible(draw):
    spaces = [s for s in two_point_spaces(draw(st.sampled_from([3, 4, 5]))) if check_na(s)]
    return draw(st.sampled_from(spaces))


@settings(max_examples=30, deadline=None)
@given(admissible(), st.floats(-30.0, 30.0), st.floats(0.02, 0.98), st.floats(0.02, 0.98))
def test_boundary_conditions_and_adjoint_symmetry(space, M, t, s):
    try:
        g = build_green(space, UNIT, M)
        hat = build_green(adjoint(space), UNIT, (-1) ** space.n * M)
    except EigenvalueCollisionError:
        return
    scale = 1.0 + abs(g(t, s))
    for d in space.left:
        assert abs(g.pairs(d, 0.0, s)) < 1e-9 * scale
    for d in space.right:
        assert abs(g.pairs(d, 1.0, s)) < 1e-9 * scale
    assert hat(s, t) == pytest.approx((-1) ** space.n * g(t, s), abs=1e-9 * scale)


def test_dump_grid(tmp_path, g0):
    path = tmp_path / "g.csv"
    dump_grid(g0, path, grid=5)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "s", "g", "dg1", "dg2", "dg3"]
    assert len(rows) == 26
    t, s, val = (float(x) for x in rows[7][:3])
    assert np.allclose([t, s], [interior_grid(UNIT, 5)[1], interior_grid(UNIT, 5)[1]])
    assert val == pytest.approx(float(g0_example(t, s)), abs=1e-14)
