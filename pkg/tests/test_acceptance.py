"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
from fractions import Fraction

import numpy as np
import pytest

from evenjacobi.exppoly import ExpPoly, orbit_sum
from evenjacobi.jacobi import c_fn, d_poly, d_quot, estimate_report, jacobi, norm_sq_closed, norm_sq_gram
from evenjacobi.root_system import KINDS, build_root_system
from evenjacobi.shiftop import check_formula_jacobi, dzero_check, jacobiexpl_check, solve_D
from evenjacobi.transform_pw import (cell_axes, poisson_oracle, pw_from_bump, pw_synthesize_and_support,
                                     synthesize, transform_numeric)
from evenjacobi.wave import (check_finite_speed, check_huygens_shell, cross_check_uodd, half_cell_axes,
                             solve_wave)

EXACT_CONFIGS = [("A1", [2]), ("A1", [4]), ("A1", [6]), ("A1xA1", [2, 4]), ("A1cubed", [2, 2, 2]), ("A2", [2]),
                 ("A2", [4]), ("B2", [2, 2]), ("B2", [2, 4])]
LEVEL = 6


def report(k: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {k:2d}] {'PASS' if ok else 'FAIL'}: {detail}")


def _weights(rs):
    return [w.coords for w in rs.dominant_weights(LEVEL)]


def test_criterion_01_norm_identity():
    count, bad = 0, []
    for kind, m in EXACT_CONFIGS:
        rs = build_root_system(kind, m)
        for w in _weights(rs):
            count += 1
            if norm_sq_gram(rs, w) != norm_sq_closed(rs, w):
                bad.append((kind, tuple(m), w))
    report(1, not bad, f"Gram norm equals closed form exactly for {count} weights in {len(EXACT_CONFIGS)} systems")
    assert not bad


def test_criterion_02_normalization():
    count, bad = 0, []
    for kind, m in EXACT_CONFIGS:
        rs = build_root_system(kind, m)
        for w in _weights(rs):
            count += 1
            lam = tuple(a + b for a, b in zip(w, rs.rho.coords))
            # P(m, mu, e) is the sum of the coefficients
            if c_fn(rs, lam) * sum(jacobi(rs, w).poly.terms.values()) != 1:
                bad.append((kind, tuple(m), w))
    report(2, not bad, f"c(mu+rho) P(mu, e) = 1 exactly for {count} weights")
    assert not bad


def test_criterion_03_plancherel_density():
    count, bad = 0, []
    for kind, m in EXACT_CONFIGS:
        rs = build_root_system(kind, m)
        for w in _weights(rs):
            count += 1
            if d_poly(rs, w) != d_quot(rs, w):
                bad.append((kind, tuple(m), w))
    a1 = build_root_system("A1", 2)
    table = [d_poly(a1, (n,)) for n in range(11)]
    table_ok = table == [Fraction((n + 1) ** 2) for n in range(11)]
    ok = not bad and table_ok
    report(3, ok, f"d_quot = d_poly for {count} weights; A1 m=2 table (n+1)^2 for n <= 10: {table_ok}")
    assert ok


def test_criterion_04_rho_alpha_bound_holds():
    rows = []
    for kind in KINDS:
        for mults in ([2], [4], [2, 4], [4, 2], [6]):
            try:
                rs = build_root_system(kind, mults)
            except ValueError:
                continue
            info = rs.describe()
            rows.append(info["rho_alpha_bound_holds"] and all(
                Fraction(r["rho_alpha"]) >= Fraction(r["half_m"]) for r in info["positive_roots"]))
    ok = all(rows)
    report(4, ok, f"rho_a >= m_a/2 for every positive root in {len(rows)} configurations")
    assert ok


def test_criterion_05_shift_operator():
    details = []
    a1 = build_root_system("A1", 2)
    D = solve_D(a1)
    expected = ExpPoly(a1, {(-1,): 1, (1,): -1})
    form_ok = set(D.terms) == {(1,)} and D.terms[(1,)] == expected
    details.append(f"A1 m=2 D = (e^-a - e^a) d: {form_ok}")
    ok = form_ok
    for kind, m in [("A1", [2]), ("A1", [4]), ("A1xA1", [2, 2]), ("A1cubed", [2, 2, 2])]:
        rs = build_root_system(kind, m)
        D = solve_D(rs, verify_level=LEVEL)
        f = check_formula_jacobi(D, LEVEL)
        z = dzero_check(D, LEVEL, 20, seed=0)
        ok &= f["first_form"] and z["passed"]
        details.append(f"{kind}{tuple(m)}: formula on {f['checked']} weights, zeros on "
                       f"{z['lattice_points']}+{z['random_points']} degenerate points")
    report(5, ok, "; ".join(details))
    assert ok


def test_criterion_06_transform_formula():
    checked = 0
    for m in (2, 4):
        rs = build_root_system("A1", m)
        D = solve_D(rs)
        inputs = [
            orbit_sum(rs, (3,)) * orbit_sum(rs, (2,)),
            orbit_sum(rs, (6,)) + orbit_sum(rs, (1,)).scale(Fraction(-3, 7)),
            (ExpPoly.monomial(rs, (4,), Fraction(2, 5)) + ExpPoly.monomial(rs, (-1,))).symmetrize(),
        ]
        for f in inputs:
            checked += jacobiexpl_check(D, f, LEVEL)["checked"]
    report(6, True, f"transform formula exact on {checked} (input, mu) pairs in A1 m in {{2, 4}}")


def test_criterion_07_paley_wiener_support():
    ok, details = True, []
    for kind, mults, N in [("A1", [2], 512), ("A1xA1", [2, 2], 128)]:
        rs = build_root_system(kind, mults)
        R = 0.9 * rs.max_small_radius
        axes = cell_axes(rs, N)
        for frac in (0.3, 0.6):
            eps = frac * R
            pw = pw_from_bump(rs, eps)  # raises unless the quadrature gate passes
            qchange = pw.quadrature_change(400.0 / eps)
            rep = pw_synthesize_and_support(pw, axes, tol=1e-6, gate_tol=1e-8)
            ok &= rep["passed"] and rep["outside_sup"] <= 1e-6 and rep["truncation_change"] < 1e-8 \
                and qchange < 1e-8
            details.append(f"{kind} eps={frac}R outside sup {rep['outside_sup']:.1e}, support "
                           f"{rep['support_radius']:.4f} <= {eps + rep['grid_spacing']:.4f}, truncation "
                           f"{rep['truncation_change']:.1e}, quadrature {qchange:.1e}")
    report(7, ok, "; ".join(details))
    assert ok


def test_criterion_08_round_trip():
    ok, details = True, []
    for kind, mults, N, level in [("A1", [2], 1024, 200), ("A1", [4], 1024, 200), ("A1xA1", [2, 2], 512, 160)]:
        rs = build_root_system(kind, mults)
        eps = 0.6 * 0.9 * rs.max_small_radius
        pw = pw_from_bump(rs, eps)
        f = poisson_oracle(pw, cell_axes(rs, N))
        c = transform_numeric(f, level, gate_tol=1e-10)
        back = synthesize(c, f.axes, 1e-8)
        err = float(np.max(np.abs(back.values - f.values)))
        ok &= err <= 1e-6
        details.append(f"{kind}{tuple(mults)} grid {N} level {level}: sup error {err:.1e}, quadrature "
                       f"{c.meta['quadrature_change']:.1e}, truncation {back.meta['truncation_change']:.1e}")
    report(8, ok, "eps=0.6R; " + "; ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# wave criteria share one solve per configuration

TAU_FRACS = (0.3, 0.5, 0.7)


@pytest.fixture(scope="module")
def a1_wave():
    rs = build_root_system("A1", 2)
    R = 0.9 * rs.max_small_radius
    eps = 0.2 * R
    pw = pw_from_bump(rs, eps, "sharp:32")
    return solve_wave(pw, R, [t * (R - eps) for t in TAU_FRACS], cell_axes(rs, 1024))


def _cube_solve(kind):
    rs = build_root_system("A1cubed", [2, 2, 2])
    R = 0.9 * rs.max_small_radius
    eps = 0.2 * R
    pw = pw_from_bump(rs, eps, "sharp:32")
    return solve_wave(pw, R, [t * (R - eps) for t in TAU_FRACS], half_cell_axes(rs, 128), kind=kind)


@pytest.fixture(scope="module")
def cube_wave():
    return _cube_solve("sin")


@pytest.fixture(scope="module")
def cube_control():
    return _cube_solve("cos")


def _rows(rep, key):
    return ", ".join(f"tau={r['tau']:.3f}: {r[key]:.1e}" for r in rep["rows"])


def test_criterion_09_finite_speed(a1_wave, cube_wave):
    a = check_finite_speed(a1_wave, 1e-5)
    c = check_finite_speed(cube_wave, 1e-5)
    ok = a["passed"] and c["passed"]
    report(9, ok, f"A1: {_rows(a, 'rel_sup_outside')}; A1^3: {_rows(c, 'rel_sup_outside')} "
                  f"(spectral radius {cube_wave.spectral_radius:.0f}, truncation "
                  f"{cube_wave.meta['truncation_change']:.1e})")
    assert ok


def test_criterion_10_strong_huygens(cube_wave, cube_control):
    h = check_huygens_shell(cube_wave, 1e-5)
    ctrl = check_huygens_shell(cube_control, 1e-5)
    ok = h["passed"] and not ctrl["passed"]
    report(10, ok, f"A1^3: {_rows(h, 'rel_sup_inside')}; cos control fails: {not ctrl['passed']} "
                   f"({_rows(ctrl, 'rel_sup_inside')})")
    assert ok


def test_criterion_11_kirchhoff_cross_check(cube_wave):
    reps = [cross_check_uodd(cube_wave, t, tol=1e-4, stride=2) for t in cube_wave.taus]
    ok = all(r["passed"] for r in reps)
    K = reps[-1]
    report(11, ok, ", ".join(f"tau={r['tau']:.3f}: L2 {r['l2_discrepancy']:.1e}" for r in reps)
           + f"; calibrated constant {K['calibrated_constant']:.12f} (Ctilde {K['predicted_constant']}), "
             f"pi/4 = {K['sphere_prefactor']:.6f}, ratio {K['ratio_to_sphere_prefactor']:.6f} "
             f"(1/(2 pi) = {1 / (2 * math.pi):.6f})")
    assert ok


def test_criterion_12_energy(a1_wave, cube_wave):
    da, dc = a1_wave.energy_drift(), cube_wave.energy_drift()
    ok = da <= 1e-10 and dc <= 1e-10
    report(12, ok, f"relative energy drift A1 {da:.1e}, A1^3 {dc:.1e}")
    assert ok


def test_criterion_13_estimate():
    points = [np.array([x]) for x in (0.0, 0.35, 0.7, 1.1, 1.5)]
    ok, details = True, []
    for m in (2, 4):
        rs = build_root_system("A1", m)
        for I in ((0,), (1,), (2,)):
            rep = estimate_report(rs, points, 20, I, bound=1.5)
            ok &= rep["passed"]
            details.append(f"m={m} I={I[0]}: max ratio {max(p['ratio'] for p in rep['points']):.3f}")
    report(13, ok, "; ".join(details))
    assert ok
