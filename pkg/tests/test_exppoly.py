from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evenjacobi.exppoly import ExpPoly, SystemMismatch, delta_poly, inner_product_m, orbit_sum
from evenjacobi.root_system import build_root_system

A2 = build_root_system("A2", 2)
A1 = build_root_system("A1", 2)

coef = st.fractions(min_value=-5, max_value=5, max_denominator=6)
terms = st.dictionaries(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), coef, max_size=5)
polys = terms.map(lambda t: ExpPoly(A2, t))


@given(polys, polys, polys)
def test_ring_axioms(f, g, h):
    assert f * g == g * f
    assert f * (g + h) == f * g + f * h
    assert (f + g) - g == f


@given(polys)
def test_conj_inverse_involution(f):
    assert f.conj_inverse().conj_inverse() == f


@given(polys)
def test_symmetrize_idempotent_and_invariant(f):
    s = f.symmetrize()
    assert s.is_invariant()
    assert s.symmetrize() == s


@given(polys, polys)
def test_evaluation_is_multiplicative(f, g):
    s = np.array([[0.13, 0.71], [0.4, 0.05]])
    assert np.allclose((f * g).eval_s(s), f.eval_s(s) * g.eval_s(s))


@given(polys, polys)
def test_exact_division(f, g):
    if g:
        assert (f * g).divide_exact(g) == f


@given(polys)
def test_json_round_trip(f):
    assert ExpPoly.from_json_obj(A2, f.to_json_obj()) == f


def test_orbit_sum_invariant():
    for mu in [(1, 0), (2, 1), (0, 3)]:
        o = orbit_sum(A2, mu)
        assert o.is_invariant()
        assert len(o) == len(A2.weyl_orbit(mu))


def test_delta_frozen_a1():
    d = delta_poly(A1)
    assert d == ExpPoly(A1, {(-2,): -1, (0,): 2, (2,): -1})
    theta = np.linspace(0, np.pi, 7)
    assert np.allclose(d.eval_s(theta[:, None] / (2 * np.pi)).real, (2 * np.sin(theta)) ** 2)


def test_inner_product_frozen():
    one = ExpPoly.const(A1, 1)
    assert inner_product_m(one, one) == Fraction(2)
    assert inner_product_m(orbit_sum(A1, (1,)), orbit_sum(A1, (1,))) == Fraction(2)
    assert inner_product_m(orbit_sum(A1, (1,)), one) == 0


def test_mixing_systems_rejected():
    with pytest.raises(SystemMismatch):
        ExpPoly.const(A1, 1) + ExpPoly.const(A2, 1)
