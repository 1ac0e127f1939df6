import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from evenjacobi.exppoly import orbit_sum
from evenjacobi.jacobi import jacobi, norm_sq_gram
from evenjacobi.root_system import build_root_system
from evenjacobi.shiftop import solve_D
from evenjacobi.transform_pw import (NotSmall, UnderResolved, bump_profile, cell_axes, forward_type_check,
                                     invwithD_check, periodize_h, poisson_oracle, pw_from_bump, round_trip_check,
                                     sample, synthesize, transform_exact, transform_numeric)

A1 = build_root_system("A1", 2)


def test_transform_of_basis_element():
    rs = build_root_system("B2", [2, 4])
    c = transform_exact(jacobi(rs, (1, 1)).poly).as_dict()
    for w, v in c.items():
        assert v == (norm_sq_gram(rs, w) if w == (1, 1) else 0)


@pytest.mark.parametrize("kind,level", [("A1", 5), ("A1xA1", 3), ("A2", 2)])
def test_numeric_transform_matches_exact(kind, level):
    rs = build_root_system(kind, 2)
    top = (level,) + (1,) * (rs.rank - 1)
    # adding the dual orbit keeps f real when -1 is not in W
    f = orbit_sum(rs, top) + orbit_sum(rs, top[::-1]) + orbit_sum(rs, (1,) * rs.rank)
    exact = transform_exact(f).as_dict()
    g = sample(rs, lambda H: f.eval_on_torus(H).real, cell_axes(rs, 32))
    num = transform_numeric(g, level + 1)
    for w, v in zip(num.weights.tolist(), num.values):
        assert v == pytest.approx(float(exact.get(tuple(w), 0)), abs=1e-11)


def test_synthesis_of_exact_coefficients():
    rs = build_root_system("A2", 2)
    f = orbit_sum(rs, (2, 1)) + orbit_sum(rs, (1, 2))
    axes = cell_axes(rs, 12)
    g = synthesize(transform_exact(f), axes, None)
    assert np.allclose(g.values, f.eval_s(g.points_s()).real, atol=1e-12)


def test_round_trip_polynomial():
    rs = build_root_system("A1xA1", [2, 4])
    f = orbit_sum(rs, (3, 2))
    g = sample(rs, lambda H: f.eval_on_torus(H).real, cell_axes(rs, 32))
    rep = round_trip_check(g, 6, tol=1e-10)
    assert rep["passed"]


def test_coarse_grid_rejected():
    g = sample(A1, lambda H: np.cos(9 * H[..., 0]), cell_axes(A1, 8))
    with pytest.raises(UnderResolved):
        transform_numeric(g, 6)


def test_not_small():
    with pytest.raises(NotSmall):
        pw_from_bump(A1, 2.0)


@pytest.mark.parametrize("kind", ["A1", "A1cubed"])
@given(xi=st.floats(0.0, 60.0))
def test_radial_transform_quad_oracle(kind, xi):
    rs = build_root_system(kind, 2)
    pw = pw_from_bump(rs, 0.5, "sharp:4")

    def b(r):
        return float(bump_profile(np.array([r / 0.5]), "sharp:4")[0])

    opts = {"limit": 400, "epsabs": 1e-13, "epsrel": 1e-13}
    if rs.rank == 1:
        ref = 2 * quad(lambda r: math.cos(xi * r) * b(r), 0, 0.5, **opts)[0]
    else:
        ref = 4 * math.pi * quad(lambda r: r * r * np.sinc(xi * r / math.pi) * b(r), 0, 0.5, **opts)[0]
    assert pw.radial(np.array([xi]))[0] * pw.vol == pytest.approx(ref, abs=1e-11 * abs(pw.mass()))


def test_poisson_summation():
    pw = pw_from_bump(A1, 0.4)
    axes = cell_axes(A1, 256)
    per = periodize_h(pw, axes, 1200.0)
    assert np.max(np.abs(per.values - poisson_oracle(pw, axes).values)) < 1e-9


def test_support_and_D_formula_rank_one():
    pw = pw_from_bump(A1, 0.3 * 0.9 * A1.max_small_radius)
    rep = invwithD_check(pw, cell_axes(A1, 512))
    assert rep["passed"]
    assert rep["literal_rel_diff"] > 1e-3


def test_forward_type():
    pw = pw_from_bump(A1, 0.5)
    assert forward_type_check(pw, solve_D(A1))["passed"]
