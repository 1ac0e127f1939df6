from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_gegenbauer, poch

from evenjacobi.exppoly import inner_product_m
from evenjacobi.jacobi import (OutsideDomainError, F_at_identity, d_poly, d_quot, estimate_report, jacobi,
                               jacobi_summary, laplacian_eigen_check, norm_sq_closed, norm_sq_gram, scalar_tables,
                               vretare_limit)
from evenjacobi.root_system import build_root_system


def test_frozen_polynomials():
    a1 = build_root_system("A1", 4)
    assert jacobi(a1, (2,)).coeffs == {(0,): Fraction(4, 3), (2,): Fraction(1)}
    assert norm_sq_gram(a1, (2,)) == Fraction(10, 3)
    b2 = build_root_system("B2", [2, 4])
    J = jacobi(b2, (0, 2))
    assert J.coeffs == {(0, 0): Fraction(7, 3), (0, 2): Fraction(1), (1, 0): Fraction(4, 3)}
    assert J.norm_sq == Fraction(56, 3)
    assert d_poly(b2, (0, 2)) == Fraction(875, 3)


@pytest.mark.parametrize("m", [2, 4, 6])
def test_rank_one_gegenbauer_oracle(m):
    """P(m, n) is the Gegenbauer polynomial C_n^{m/2}(cos theta) rescaled to leading coefficient one."""
    rs = build_root_system("A1", m)
    lam = m / 2
    theta = np.linspace(0.1, 3.0, 11)
    for n in range(7):
        P = jacobi(rs, (n,)).poly
        ours = P.eval_s((theta / (2 * np.pi))[:, None]).real
        ref = eval_gegenbauer(n, lam, np.cos(theta)) * np.prod(np.arange(1, n + 1)) / poch(lam, n)
        assert np.allclose(ours, ref, rtol=1e-12, atol=1e-12)


def test_a1_m2_plancherel_table():
    rs = build_root_system("A1", 2)
    assert [d_poly(rs, (n,)) for n in range(11)] == [Fraction((n + 1) ** 2) for n in range(11)]


@pytest.mark.parametrize("kind,mults", [("A2", [2]), ("B2", [2, 4]), ("A1xA1", [2, 4])])
def test_orthogonality_and_identities(kind, mults):
    rs = build_root_system(kind, mults)
    ws = rs.dominant_weights(2)
    for i, a in enumerate(ws):
        Pa = jacobi(rs, a).poly
        assert norm_sq_gram(rs, a) == norm_sq_closed(rs, a)
        assert F_at_identity(rs, a) == 1
        assert d_poly(rs, a.coords) == d_quot(rs, a)
        for b in ws[:i]:
            assert inner_product_m(Pa, jacobi(rs, b).poly) == 0


@given(st.sampled_from([("A2", 2), ("B2", 2), ("A1", 4)]), st.integers(0, 3), st.integers(0, 3))
def test_laplacian_eigen(kind_m, a, b):
    rs = build_root_system(*kind_m)
    mu = (a, b)[: rs.rank]
    assert laplacian_eigen_check(rs, mu)


def test_scalar_tables():
    t = scalar_tables(build_root_system("A1cubed", 2))
    assert t.Ctilde_consistent == Fraction(1, 8)


def test_vretare_limit_matches_d():
    rs = build_root_system("A2", 2)
    rep = vretare_limit(rs, (1, 1))
    assert rep["corollary"]["converged"]
    assert rep["corollary"]["value"] == pytest.approx(rep["d_quot"], rel=1e-6)


def test_summary_rows():
    rows = jacobi_summary(build_root_system("A1", 2), 4)
    assert len(rows) == 5
    assert all(r["norm_sq_gram"] == r["norm_sq_closed"] and r["F_at_identity"] == "1" for r in rows)


def test_estimate_report_and_domain():
    rs = build_root_system("A1", 2)
    rep = estimate_report(rs, [np.array([0.4])], 10)
    assert rep["passed"]
    with pytest.raises(OutsideDomainError):
        estimate_report(rs, [np.array([2.0])], 4)
