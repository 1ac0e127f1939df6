from fractions import Fraction

import pytest

from evenjacobi.exppoly import ExpPoly, orbit_sum
from evenjacobi.root_system import build_root_system
from evenjacobi.shiftop import (AnsatzInsufficient, DiffOperator, adjoint_pairing_check, check_formula_jacobi,
                                ctilde_report, dzero_check, formal_adjoint, jacobiexpl_check, solve_D,
                                weyl_extension_check)

A1 = build_root_system("A1", 2)


def test_a1_m2_operator_frozen():
    D = solve_D(A1)
    assert set(D.terms) == {(1,)}
    assert D.terms[(1,)] == ExpPoly(A1, {(-1,): 1, (1,): -1})


def test_a1_m4_operator_frozen():
    rs = build_root_system("A1", 4)
    D = solve_D(rs)
    assert D.terms[(1,)] == ExpPoly(rs, {(-2,): Fraction(1, 2), (2,): Fraction(-1, 2)})
    assert D.terms[(2,)] == ExpPoly(rs, {(-2,): Fraction(1, 2), (0,): -1, (2,): Fraction(1, 2)})


@pytest.mark.parametrize("kind,mults", [("A1", [2]), ("A1", [4]), ("A1xA1", [2, 2])])
def test_formula_and_degenerate_zeros(kind, mults):
    D = solve_D(build_root_system(kind, mults))
    assert check_formula_jacobi(D, 4)["first_form"]
    assert dzero_check(D, 4, 5)["passed"]


def test_second_form_constant():
    rep = ctilde_report(solve_D(A1))
    assert rep["holds_with_consistent"]
    assert not rep["holds_with_literal"]


def test_adjoint_and_transform_formula():
    D = solve_D(A1)
    assert adjoint_pairing_check(D, 3)
    assert formal_adjoint(formal_adjoint(D)).terms == D.terms
    f = orbit_sum(A1, (3,)) * orbit_sum(A1, (1,))
    assert jacobiexpl_check(D, f, 5)["passed"]


def test_weyl_extension_reports_both_forms():
    D = solve_D(A1)
    rep = weyl_extension_check(D, (2,), A1.weyl_elements[1])
    assert rep["shifted"]["holds"]


def test_rank_two_requires_ansatz_bounds():
    with pytest.raises(AnsatzInsufficient):
        solve_D(build_root_system("A2", 2))


def test_operator_json_round_trip():
    D = solve_D(build_root_system("A1", 4))
    assert DiffOperator.from_json_obj(D.to_json_obj()).terms == D.terms
