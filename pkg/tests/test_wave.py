import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evenjacobi.exppoly import orbit_sum
from evenjacobi.jacobi import jacobi
from evenjacobi.root_system import build_root_system
from evenjacobi.transform_pw import (UnsupportedRank, bump_profile, cell_axes, pw_from_bump, synthesize,
                                     transform_exact)
from evenjacobi.wave import (NotAsserted, check_finite_speed, check_huygens_shell, energy, euclid_mean_value,
                             half_cell_axes, kirchhoff_v, sphere_prefactor, propagate, propagator, solve_wave,
                             sphere_area)

A1 = build_root_system("A1", 2)


def test_propagator_kinds():
    x = np.array([1.0, 2.0, 5.0])
    assert np.allclose(propagator(x, 0.0), 0.0)
    assert np.allclose(propagator(x, 1e-8), 1e-8)
    assert np.allclose(propagator(x, 0.3, "cos"), np.cos(0.3 * x) / x)
    with pytest.raises(ValueError):
        propagator(x, 0.3, "tan")


@pytest.mark.parametrize("kind,mu", [("A2", (1, 2)), ("B2", (2, 1)), ("A1cubed", (1, 0, 2))])
def test_modewise_exactness(kind, mu):
    """A single Jacobi mode evolves by the closed-form factor sin(|mu+rho| tau)/|mu+rho|."""
    rs = build_root_system(kind, 2)
    P = jacobi(rs, mu).poly
    c = transform_exact(P)
    axes = cell_axes(rs, 10)
    tau = 0.37
    u = synthesize(propagate(c, tau), axes, None).values
    k = np.array(mu, dtype=float) + np.array(rs.rho.coords, dtype=float)
    x = math.sqrt(float(rs.weight_ip(tuple(k), tuple(k))))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    assert np.allclose(u, math.sin(x * tau) / x * P.eval_s(pts), atol=1e-12)


def test_energy_conserved_for_finite_data():
    rs = build_root_system("B2", [2, 4])
    f = orbit_sum(rs, (2, 1)) + orbit_sum(rs, (0, 3))
    c = transform_exact(f)
    c = type(c)(rs, c.weights, np.asarray(c.values, dtype=complex), c.truncation)
    e = [energy(c, t) for t in (0.0, 0.4, 1.3, 7.0)]
    assert np.allclose(e, e[0], rtol=1e-13)


def test_mean_value_oracles():
    H = np.array([[0.3, -0.2, 0.5], [1.0, 0.0, 0.0]])

    def sq(p):
        return np.sum(p * p, axis=-1)

    assert np.allclose(euclid_mean_value(sq, 0.0, H, 3), sq(H))
    assert np.allclose(euclid_mean_value(sq, 0.7, H, 3), sq(H) + 0.49)
    assert np.allclose(euclid_mean_value(lambda p: p[..., 0] ** 2, 0.7, H[:, :1], 1), H[:, 0] ** 2 + 0.49)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_prefactor(3) == pytest.approx(math.pi / 4)


@given(st.floats(0.1, 3.0), st.floats(0.0, 2.0))
def test_kirchhoff_plane_waves(k, tau):
    """Flat solutions with velocity datum cos(k.x) are sin(|k| tau)/|k| cos(k.x)."""
    X = np.array([[0.2, 0.1, -0.4], [1.0, 2.0, 0.5]])
    kv = np.array([k, 0.5 * k, -0.3 * k])
    kn = np.linalg.norm(kv)
    v3 = kirchhoff_v(lambda p: np.cos(p @ kv), X, tau, 3)
    assert np.allclose(v3, np.sin(kn * tau) / kn * np.cos(X @ kv), atol=1e-10)
    v1 = kirchhoff_v(lambda p: np.cos(k * p[..., 0]), X[:, :1], tau, 1)
    assert np.allclose(v1, np.sin(k * tau) / k * np.cos(k * X[:, 0]), atol=1e-10)


def test_rank_one_dalembert_cross_check():
    """delta u from the spectral solver against Ctilde D(v), v the d'Alembert solution with datum b."""
    R = 0.9 * A1.max_small_radius
    eps = 0.2 * R
    pw = pw_from_bump(A1, eps, "sharp:32")
    axes = cell_axes(A1, 512)
    tau = 0.5 * (R - eps)
    wf = solve_wave(pw, R, [tau], axes)
    theta = 2 * np.pi * axes[0]

    def b_per(p):
        x = p[..., 0]
        return bump_profile(np.abs(x - 2 * np.pi * np.round(x / (2 * np.pi))) / eps, "sharp:32")

    h = 1e-3
    X = theta[:, None]

    def v(shift):
        return kirchhoff_v(b_per, X + shift, tau, 1, 256)

    # fourth-order central difference
    dv = (8 * (v(h) - v(-h)) - (v(2 * h) - v(-2 * h))) / (12 * h)
    # D = (e^{-a} - e^{a}) d with d = -i d/dtheta, so D v = -2 sin(theta) dv/dtheta
    Dv = -2 * np.sin(theta) * dv
    du = wf.delta_u(tau)
    assert np.linalg.norm(du - 0.5 * Dv) / np.linalg.norm(du) < 1e-6


def test_finite_speed_rank_one_and_control():
    R = 0.9 * A1.max_small_radius
    pw = pw_from_bump(A1, 0.2 * R, "sharp:32")
    taus = [t * 0.8 * R for t in (0.3, 0.5, 0.7)]
    wf = solve_wave(pw, R, taus, cell_axes(A1, 1024))
    assert check_finite_speed(wf)["passed"]
    assert wf.energy_drift() < 1e-10
    with pytest.raises(NotAsserted):
        check_huygens_shell(wf)
    cos = solve_wave(pw, R, taus, cell_axes(A1, 1024), kind="cos")
    assert not check_finite_speed(cos)["passed"]


def test_even_rank_not_asserted_and_grids():
    rs = build_root_system("A1xA1", 2)
    with pytest.raises(NotAsserted):
        check_huygens_shell(type("W", (), {"rs": rs})())
    ax = half_cell_axes(rs, 8)
    assert np.allclose(ax[0], [1 / 16, 3 / 16, 5 / 16, 7 / 16])
    with pytest.raises(UnsupportedRank):
        half_cell_axes(build_root_system("A2", 2), 8)


def test_datum_must_fit():
    pw = pw_from_bump(A1, 1.0)
    with pytest.raises(ValueError):
        solve_wave(pw, 0.9, [0.1], cell_axes(A1, 64))
