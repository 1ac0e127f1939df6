"""Jacobi transform, inversion and Paley-Wiener data built from Euclidean bumps.

Grids are tensor grids in fractional Gamma coordinates ``s`` (so
``e^mu = exp(2 pi i mu.s)``); a full fundamental cell is ``arange(N)/N``
on every axis.  Products of rank-one systems use separable contractions
with the three-term-recurrence basis; the other systems evaluate the exact
polynomials, which limits them to moderate levels.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from numpy.polynomial.legendre import leggauss
from scipy.special import j0, jv

from ._spectral import (contract_axes, factor_multiplicities, generic_basis, inv_c_array, norm_sq_array,
                        rank_one_basis, weight_norm)
from .exppoly import ExpPoly, delta_poly, inner_product_m
from .jacobi import e_density, jacobi, scalar_tables
from .root_system import RootSystemData


class GateFailure(RuntimeError):
    """A numerical convergence gate did not pass."""


class UnderResolved(GateFailure):
    pass


class TruncationInsufficient(GateFailure):
    pass


class NotSmall(ValueError):
    pass


class UnsupportedRank(ValueError):
    pass


# ---------------------------------------------------------------------------
# grids


def cell_axes(rs: RootSystemData, N: int | Sequence[int]) -> list[np.ndarray]:
    Ns = [N] * rs.rank if isinstance(N, int) else list(N)
    return [np.arange(n) / n for n in Ns]


def _is_full_cell(axes) -> bool:
    return all(len(a) > 1 and np.allclose(a, np.arange(len(a)) / len(a)) for a in axes)


@dataclass
class GridFunction:
    rs: RootSystemData
    axes: list  # fractional Gamma coordinates per axis
    values: np.ndarray
    w_invariant: bool = False
    meta: dict = field(default_factory=dict)

    def points_s(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def points(self) -> np.ndarray:
        """Orthonormal coordinates of H at every grid point."""
        return self.rs.s_to_orthonormal(self.points_s())

    def dist(self) -> np.ndarray:
        """Distance of H to the lattice Gamma (i.e. ||X|| for the representative in B_R)."""
        return self.rs.dist_to_gamma(self.points_s())

    @property
    def spacing(self) -> float:
        """Length of the longest cell edge in orthonormal coordinates."""
        steps = [(a[1] - a[0]) if len(a) > 1 else 0.0 for a in self.axes]
        return max(float(np.linalg.norm(self.rs.gamma_matrix[:, j])) * st for j, st in enumerate(steps))

    def scaled(self, c) -> "GridFunction":
        return GridFunction(self.rs, self.axes, c * self.values, self.w_invariant, dict(self.meta))

    def invariance_defect(self) -> float:
        """max |f(wH) - f(H)| over grid points whose images are grid points (full cells only)."""
        if not _is_full_cell(self.axes):
            raise ValueError("invariance check needs a full-cell grid")
        Ns = [len(a) for a in self.axes]
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in Ns], indexing="ij"), axis=-1)
        defect = 0.0
        for A in self.rs.weyl_elements:
            # t -> w t sends fractional coordinates s to A_w^{-T} s; the group is closed, so A^T suffices
            M = np.array(A, dtype=int).T
            img = (idx @ M.T) % np.array(Ns)
            moved = self.values[tuple(img[..., j] for j in range(self.rs.rank))]
            defect = max(defect, float(np.max(np.abs(moved - self.values))))
        return defect

    def to_csv(self, path, header: dict | None = None) -> None:
        pts_s = self.points_s().reshape(-1, self.rs.rank)
        pts = self.rs.s_to_orthonormal(pts_s)
        vals = self.values.reshape(-1)
        cplx = np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > 0
        with open(path, "w", newline="") as fh:
            if header is not None:
                fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            wr = csv.writer(fh)
            n = self.rs.rank
            wr.writerow([f"s{j + 1}" for j in range(n)] + [f"H{j + 1}" for j in range(n)]
                        + (["value_re", "value_im"] if cplx else ["value"]))
            for s, h, v in zip(pts_s, pts, vals):
                row = [f"{x:.10f}" for x in s] + [f"{x:.10f}" for x in h]
                row += [f"{v.real:.12e}", f"{v.imag:.12e}"] if cplx else [f"{float(np.real(v)):.12e}"]
                wr.writerow(row)


def sample(rs: RootSystemData, func: Callable[[np.ndarray], np.ndarray], axes, w_invariant=True,
           meta=None) -> GridFunction:
    g = GridFunction(rs, list(axes), np.zeros([len(a) for a in axes]), w_invariant, dict(meta or {}))
    g.values = np.asarray(func(g.points()))
    return g


def delta_on_grid(rs: RootSystemData, axes) -> np.ndarray:
    if rs.is_product_of_rank_one:
        ms = factor_multiplicities(rs)
        mesh = np.meshgrid(*axes, indexing="ij")
        out = np.ones(mesh[0].shape)
        for m, s in zip(ms, mesh):
            out = out * (2 * np.sin(2 * np.pi * s)) ** m
        return out
    g = GridFunction(rs, list(axes), np.zeros([len(a) for a in axes]))
    return delta_poly(rs).eval_s(g.points_s()).real


# ---------------------------------------------------------------------------
# spectral coefficients


@dataclass
class SpectralCoeffs:
    rs: RootSystemData
    weights: np.ndarray  # (k, n) integer weight coordinates, dominant
    values: np.ndarray  # (k,) complex, or object array of Fractions when exact
    truncation: float  # level (max coordinate) or radius in ||mu+rho||
    truncation_kind: str = "level"
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in w): v for w, v in zip(self.weights, self.values)}

    @property
    def is_exact(self) -> bool:
        return self.values.dtype == object

    def measure(self) -> np.ndarray:
        """||mu+rho|| for ball truncation, max coordinate for level truncation."""
        if self.truncation_kind == "ball":
            rho = np.array(self.rs.rho.coords, dtype=float)
            return weight_norm(self.rs, self.weights + rho)
        return self.weights.max(axis=1) if len(self.weights) else np.zeros(0)

    def restrict(self, cut: float) -> "SpectralCoeffs":
        keep = self.measure() <= cut + 1e-12
        return SpectralCoeffs(self.rs, self.weights[keep], self.values[keep], cut, self.truncation_kind,
                              dict(self.meta))

    def scaled(self, c) -> "SpectralCoeffs":
        return SpectralCoeffs(self.rs, self.weights, self.values * c, self.truncation, self.truncation_kind,
                              dict(self.meta))

    def parseval_sum(self) -> float:
        vals = np.asarray(self.values, dtype=complex)
        return float(np.sum(np.abs(vals) ** 2 / norm_sq_array(self.rs, self.weights)))


def transform_exact(f: ExpPoly, symmetrize: bool = False) -> SpectralCoeffs:
    """f^(mu) = <f, P(m, mu)>_m as exact rationals on the dominance cone below f's weights."""
    rs = f.rs
    if symmetrize:
        f = f.symmetrize()
    elif not f.is_invariant():
        raise ValueError("transform_exact expects a W-invariant exponential polynomial")
    tops = {rs.dominant_rep(k) for k in f.terms}
    support = set()
    for t in tops:
        support |= {w.coords for w in rs.lower_cone(t)}
    ws = sorted(support, key=lambda c: (sum(rs.simple_root_expansion(c)), c))
    vals = [inner_product_m(f, jacobi(rs, w).poly) for w in ws]
    level = max((max(w) for w in ws), default=0)
    return SpectralCoeffs(rs, np.array(ws, dtype=int).reshape(-1, rs.rank), np.array(vals, dtype=object), level)


def _weights_box(rs, level) -> np.ndarray:
    return np.array([w.coords for w in rs.dominant_weights(level)], dtype=int).reshape(-1, rs.rank)


def _transform_on(rs, axes, values, level):
    Ns = [len(a) for a in axes]
    fd = values * delta_on_grid(rs, axes) / float(np.prod(Ns))
    if rs.is_product_of_rank_one:
        mats = [rank_one_basis(m, level, 2 * np.pi * a).T for m, a in zip(factor_multiplicities(rs), axes)]
        dense = fd
        for M in mats:
            dense = np.tensordot(dense, M, axes=([0], [0]))
        ws = np.array(list(product(range(level + 1), repeat=rs.rank)), dtype=int)
        return ws, dense.reshape(-1)
    ws = _weights_box(rs, level)
    s = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    out = []
    for w in ws:
        P = jacobi(rs, tuple(w)).poly
        out.append(np.sum(fd * np.conj(P.eval_s(s))))
    return ws, np.array(out)


def transform_numeric(f: GridFunction, level: int, gate_tol: float = 1e-10) -> SpectralCoeffs:
    """Lattice-rule quadrature of <f, P(m, mu)>_m for every dominant mu with coordinates <= level.

    Gate: the same rule on the half-resolution subgrid must agree to
    ``gate_tol`` relative to the largest coefficient.
    """
    rs = f.rs
    if not _is_full_cell(f.axes):
        raise ValueError("transform_numeric needs samples on a full fundamental cell")
    Ns = [len(a) for a in f.axes]
    if min(Ns) < 2 * level + 1:
        raise UnderResolved(f"grid {Ns} cannot resolve level {level}")
    ws, full = _transform_on(rs, f.axes, f.values, level)
    half_axes = [a[::2] for a in f.axes]
    sub = f.values[tuple(slice(None, None, 2) for _ in Ns)]
    _, half = _transform_on(rs, half_axes, sub, level)
    scale = max(float(np.max(np.abs(full))), 1e-300)
    change = float(np.max(np.abs(full - half))) / scale if len(full) else 0.0
    if change >= gate_tol:
        raise UnderResolved(f"grid doubling changes coefficients by {change:.3e} (gate {gate_tol:.0e})")
    return SpectralCoeffs(rs, ws, full.astype(complex), level, "level",
                          {"grid": Ns, "quadrature_change": change, "gate_tol": gate_tol})


# ---------------------------------------------------------------------------
# synthesis


def _synth_product(c: SpectralCoeffs, axes) -> np.ndarray:
    rs = c.rs
    if len(c.weights) == 0:
        return np.zeros([len(a) for a in axes])
    top = c.weights.max(axis=0)
    dense = np.zeros(tuple(int(t) + 1 for t in top), dtype=complex)
    vals = np.asarray(c.values, dtype=complex) / norm_sq_array(rs, c.weights)
    dense[tuple(c.weights.T)] = vals
    mats = [rank_one_basis(m, int(t), 2 * np.pi * a) for m, t, a in zip(factor_multiplicities(rs), top, axes)]
    return contract_axes(dense, mats)


def _synth_generic(c: SpectralCoeffs, axes) -> np.ndarray:
    s = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    out = np.zeros(s.shape[:-1], dtype=complex)
    norms = norm_sq_array(c.rs, c.weights)
    for w, v, nrm in zip(c.weights, np.asarray(c.values, dtype=complex), norms):
        if v:
            out += v / nrm * jacobi(c.rs, tuple(w)).poly.eval_s(s)
    return out


def synthesize_raw(c: SpectralCoeffs, axes) -> np.ndarray:
    if c.rs.is_product_of_rank_one:
        return _synth_product(c, axes)
    return _synth_generic(c, axes)


def synthesize(c: SpectralCoeffs, axes, gate_tol: float | None = 1e-8) -> GridFunction:
    """f = sum f^(mu) P(m, mu)/|P(m, mu)|^2 on the grid.

    Gate: the sum truncated at half the truncation level must agree with
    the full sum to ``gate_tol`` in relative sup norm.
    """
    vals = synthesize_raw(c, axes)
    meta = {"truncation": c.truncation, "truncation_kind": c.truncation_kind}
    if gate_tol is not None:
        half = synthesize_raw(c.restrict(c.truncation / 2), axes)
        peak = max(float(np.max(np.abs(vals))), 1e-300)
        change = float(np.max(np.abs(vals - half))) / peak
        meta.update({"truncation_change": change, "gate_tol": gate_tol})
        if change >= gate_tol:
            raise TruncationInsufficient(
                f"doubling the truncation level changes the sup norm by {change:.3e} (gate {gate_tol:.0e})")
    if np.max(np.abs(vals.imag), initial=0.0) <= 1e-13 * max(float(np.max(np.abs(vals), initial=0.0)), 1e-300):
        vals = vals.real
    return GridFunction(c.rs, list(axes), vals, True, meta)


# ---------------------------------------------------------------------------
# Paley-Wiener data


def parse_profile(profile: str) -> float:
    """Sharpness parameter a of the bump exp(a - a/(1 - x^2)); 'standard' is a = 1 without the shift."""
    if profile == "standard":
        return 1.0
    if profile.startswith("sharp:"):
        return float(profile.split(":", 1)[1])
    raise ValueError(f"unknown bump profile {profile!r}")


def bump_profile(x: np.ndarray, profile: str) -> np.ndarray:
    a = parse_profile(profile)
    shift = 0.0 if profile == "standard" else a
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(shift - a / (1 - x[inside] ** 2))
    return out


_PANEL_NODES = 32


@dataclass(frozen=True, eq=False)
class PWData:
    """h = (1/vol) * Euclidean Fourier transform of a radial bump supported in B_R.

    The radial integral uses composite Gauss-Legendre quadrature with
    ``panels`` panels of 32 nodes; a single high-order rule has node and
    weight errors that leave a noise floor near 1e-13.
    """

    rs: RootSystemData
    R: float
    profile: str = "sharp:16"
    panels: int = 128

    @cached_property
    def vol(self) -> float:
        return float(abs(np.linalg.det(self.rs.gamma_matrix)))

    @cached_property
    def _quad(self):
        x, w = leggauss(_PANEL_NODES)
        edges = np.linspace(0.0, self.R, self.panels + 1)
        half = np.diff(edges) / 2
        mid = (edges[:-1] + edges[1:]) / 2
        r = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
        wr = (half[:, None] * w[None, :]).reshape(-1)
        return r, wr * bump_profile(r / self.R, self.profile)

    def bump(self, H: np.ndarray) -> np.ndarray:
        """b(H) in orthonormal coordinates (not periodized)."""
        return bump_profile(np.linalg.norm(np.asarray(H, dtype=float), axis=-1) / self.R, self.profile)

    def radial(self, xi, chunk: int = 4096) -> np.ndarray:
        """h as a function of xi = sqrt(<lam, lam>) (complex allowed; even in xi)."""
        xi = np.asarray(xi)
        flat, inverse = np.unique(xi.reshape(-1), return_inverse=True)
        cplx = np.iscomplexobj(flat)
        out = np.empty(flat.shape, dtype=complex if cplx else float)
        r, wb = self._quad
        n = self.rs.rank
        for i in range(0, len(flat), chunk):
            z = flat[i:i + chunk][:, None] * r[None, :]
            if n == 1:
                k = 2 * np.cos(z)
            elif n == 2:
                k = 2 * np.pi * (jv(0, z) if cplx else j0(z)) * r
            elif n == 3:
                k = 4 * np.pi * r * r * np.divide(np.sin(z), z, out=np.ones_like(z), where=z != 0)
            else:
                raise UnsupportedRank(f"radial transform for rank {n}")
            out[i:i + chunk] = k @ wb
        return out[inverse].reshape(xi.shape) / self.vol

    def h(self, lam) -> np.ndarray:
        """h(lam) for weight-coordinate vectors (last axis)."""
        return self.radial(weight_norm(self.rs, np.asarray(lam)))

    def F(self, mu) -> np.ndarray:
        """F(mu) = h(mu+rho)/c(mu+rho)."""
        lam = np.asarray(mu, dtype=float) + np.array(self.rs.rho.coords, dtype=float)
        return self.h(lam) * inv_c_array(self.rs, lam)

    def quadrature_change(self, xi_max: float, samples: int = 257) -> float:
        """Relative change of h on [0, xi_max] when the number of panels is doubled."""
        xi = np.linspace(0, xi_max, samples)
        coarse = self.radial(xi)
        fine = PWData(self.rs, self.R, self.profile, 2 * self.panels).radial(xi)
        return float(np.max(np.abs(fine - coarse)) / abs(fine[0]))

    def mass(self) -> float:
        """Integral of |b| over t (n-dimensional)."""
        return float(self.radial(np.array([0.0]))[0] * self.vol)


def pw_from_bump(rs: RootSystemData, R: float, profile: str = "sharp:16", panels: int | None = None,
                 xi_max: float | None = None, gate_tol: float = 1e-8) -> PWData:
    rmax = rs.max_small_radius
    if not (0 < R <= rmax):
        raise NotSmall(f"R = {R} is not small; the maximal admissible radius is {rmax:.12f}")
    parse_profile(profile)
    if xi_max is None:
        xi_max = 400.0 / R
    if panels is None:
        panels = max(64, int(math.ceil(xi_max * R / 8)))
    pw = PWData(rs, R, profile, panels)
    change = pw.quadrature_change(xi_max)
    if change >= gate_tol:
        raise UnderResolved(f"bump transform quadrature changes by {change:.3e} under panel doubling")
    return pw


def pw_coeffs(pw: PWData, radius: float) -> SpectralCoeffs:
    """F(mu) on {mu in P+ : ||mu+rho|| <= radius}."""
    rs = pw.rs
    rho = np.array(rs.rho.coords, dtype=float)
    ws = _ball_weights(rs, radius, dominant=True)
    vals = pw.F(ws) if len(ws) else np.zeros(0)
    keep = weight_norm(rs, ws + rho) <= radius + 1e-12
    return SpectralCoeffs(rs, ws[keep], np.asarray(vals, dtype=complex)[keep], radius, "ball",
                          {"R": pw.R, "profile": pw.profile})


def _coord_bounds(rs, radius):
    # |mu_i| = |<mu, a_i>|/<a_i, a_i> <= ||mu|| / ||a_i||
    return [int(math.ceil(radius / math.sqrt(float(rs.gram[i][i])))) + 1 for i in range(rs.rank)]


def _ball_weights(rs, radius, dominant) -> np.ndarray:
    b = _coord_bounds(rs, radius)
    rng = [range(0 if dominant else -bi, bi + 1) for bi in b]
    grids = np.stack(np.meshgrid(*[np.array(list(r)) for r in rng], indexing="ij"), axis=-1).reshape(-1, rs.rank)
    shift = np.array(rs.rho.coords, dtype=float) if dominant else 0.0
    keep = weight_norm(rs, grids + shift) <= radius + 1e-12
    return grids[keep]


def choose_radius(pw: PWData, axes, start: float | None = None, max_radius: float = 4096.0,
                  gate_tol: float = 1e-8) -> tuple[float, GridFunction]:
    """Double the spectral radius until the truncation gate passes."""
    radius = start if start is not None else 32.0 / pw.R
    last = None
    while radius <= max_radius:
        try:
            return radius, synthesize(pw_coeffs(pw, radius), axes, gate_tol)
        except TruncationInsufficient as exc:
            last = exc
            radius *= 2
    raise TruncationInsufficient(f"no spectral radius up to {max_radius} passes the gate: {last}")


def support_radius(g: GridFunction, tol: float) -> float:
    """Smallest r such that |g| <= tol * max|g| wherever dist(H, Gamma) > r."""
    a = np.abs(g.values)
    peak = float(a.max())
    if peak == 0:
        return 0.0
    d = g.dist()
    big = a > tol * peak
    return float(d[big].max()) if big.any() else 0.0


def outside_sup(g: GridFunction, radius: float) -> float:
    """Relative sup of |g| over grid points with dist(H, Gamma) > radius."""
    a = np.abs(g.values)
    peak = float(a.max())
    out = a[g.dist() > radius]
    return float(out.max() / peak) if out.size and peak > 0 else 0.0


def pw_synthesize_and_support(pw: PWData, axes, tol: float = 1e-6, radius: float | None = None,
                              gate_tol: float = 1e-8) -> dict:
    if radius is None:
        radius, field_ = choose_radius(pw, axes, gate_tol=gate_tol)
    else:
        field_ = synthesize(pw_coeffs(pw, radius), axes, gate_tol)
    h = field_.spacing
    r = support_radius(field_, tol)
    return {
        "field": field_,
        "spectral_radius": radius,
        "support_radius": r,
        "grid_spacing": h,
        "R": pw.R,
        "tol": tol,
        "outside_sup": outside_sup(field_, pw.R + h),
        "passed": r <= pw.R + h,
        "truncation_change": field_.meta.get("truncation_change"),
    }


# ---------------------------------------------------------------------------
# periodization and the D-formula


def _lattice_sum(rs, axes, weights, coeffs) -> np.ndarray:
    """sum_k coeffs[k] exp(2 pi i weights[k].s) on a tensor grid, via a dense box."""
    if len(weights) == 0:
        return np.zeros([len(a) for a in axes], dtype=complex)
    lo = weights.min(axis=0)
    hi = weights.max(axis=0)
    dense = np.zeros(tuple(int(x) for x in hi - lo + 1), dtype=complex)
    np.add.at(dense, tuple((weights - lo).T), coeffs)
    mats = [np.exp(2j * np.pi * np.outer(np.arange(l, h + 1), a)) for l, h, a in zip(lo, hi, axes)]
    return contract_axes(dense, mats)


def periodize_h(pw: PWData, axes, radius: float, gate_tol: float | None = 1e-8) -> GridFunction:
    """h_per = sum over mu in P, ||mu|| <= radius, of h(mu) e^mu; Gamma-periodic."""
    rs = pw.rs
    ws = _ball_weights(rs, radius, dominant=False)
    hv = pw.h(ws)
    vals = _lattice_sum(rs, axes, ws, hv)
    meta = {"radius": radius}
    if gate_tol is not None:
        inner = weight_norm(rs, ws) <= radius / 2
        half = _lattice_sum(rs, axes, ws[inner], hv[inner])
        change = float(np.max(np.abs(vals - half)) / np.max(np.abs(vals)))
        meta["truncation_change"] = change
        if change >= gate_tol:
            raise TruncationInsufficient(f"periodized h changes by {change:.3e} under radius doubling")
    return GridFunction(rs, list(axes), vals.real, True, meta)


def poisson_oracle(pw: PWData, axes) -> GridFunction:
    """The bump itself, periodized directly (valid because R is small)."""
    g = GridFunction(pw.rs, list(axes), np.zeros([len(a) for a in axes]), True)
    g.values = bump_profile(g.dist() / pw.R, pw.profile)
    return g


def apply_D_to_lattice_sum(D, pw: PWData, axes, radius: float) -> np.ndarray:
    """D(sum_{mu in P} h(mu) e^mu) on the grid, using D(e^mu) = sum_I mu^I a_I e^mu."""
    rs = pw.rs
    ws = _ball_weights(rs, radius, dominant=False)
    hv = pw.h(ws)
    s = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    out = np.zeros(s.shape[:-1], dtype=complex)
    for I, a in D.terms.items():
        mono = np.prod(ws.astype(float) ** np.array(I), axis=1)
        out += a.eval_s(s) * _lattice_sum(rs, axes, ws, hv * mono)
    return out


@lru_cache(maxsize=None)
def _bump_derivatives(rs, R, profile, I):
    """Lambdified d^I b / ds^I of the radial bump in fractional coordinates, inside the support."""
    a = parse_profile(profile)
    shift = 0 if profile == "standard" else a
    s = sp.symbols(f"s0:{rs.rank}", real=True)
    G = rs.gamma_matrix
    H = [sum(sp.Float(G[i, j]) * s[j] for j in range(rs.rank)) for i in range(rs.rank)]
    x2 = sum(h * h for h in H) / sp.Float(R) ** 2
    expr = sp.exp(shift - sp.Float(a) / (1 - x2))
    for j, k in enumerate(I):
        if k:
            expr = sp.diff(expr, s[j], k)
    return sp.lambdify(s, expr, "numpy")


def nearest_representative(rs: RootSystemData, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Representative of s modulo Gamma nearest to the origin, and its orthonormal norm."""
    rep = s - np.round(s)
    best = rep.copy()
    bestd = np.linalg.norm(rs.s_to_orthonormal(rep), axis=-1)
    for off in product((-1, 0, 1), repeat=rs.rank):
        cand = rep + np.array(off, dtype=float)
        d = np.linalg.norm(rs.s_to_orthonormal(cand), axis=-1)
        better = d < bestd
        best[better] = cand[better]
        bestd = np.minimum(bestd, d)
    return best, bestd


def bump_derivative(pw: PWData, I, s: np.ndarray) -> np.ndarray:
    """d^I b_per / ds^I at fractional coordinates s (last axis), zero off the support."""
    rs = pw.rs
    best, bestd = nearest_representative(rs, np.asarray(s, dtype=float))
    inside = bestd < pw.R * (1 - 1e-9)
    out = np.zeros(best.shape[:-1])
    pts = best[inside]
    fn = _bump_derivatives(rs, pw.R, pw.profile, tuple(I))
    out[inside] = np.broadcast_to(fn(*[pts[:, j] for j in range(rs.rank)]), (len(pts),))
    return out


def apply_D_to_bump(D, pw: PWData, axes) -> np.ndarray:
    """D(b_per) from symbolic derivatives of the bump: d_i = (2 pi i)^{-1} d/ds_i."""
    s = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    out = np.zeros(s.shape[:-1], dtype=complex)
    for I, a in D.terms.items():
        out += a.eval_s(s) * bump_derivative(pw, I, s) / (2j * np.pi) ** sum(I)
    return out


def invwithD_check(pw: PWData, axes, D=None, radius: float | None = None, tol: float = 1e-6,
                   gate_tol: float = 1e-8) -> dict:
    """delta f from the Jacobi series against Ctilde D applied to the periodized h and to the bump."""
    from .shiftop import solve_D

    rs = pw.rs
    if D is None:
        if rs.rank > 1 and not rs.is_product_of_rank_one:
            raise UnsupportedRank("no solved D for this system without explicit ansatz bounds")
        D = solve_D(rs)
    res = pw_synthesize_and_support(pw, axes, tol, radius, gate_tol)
    f = res["field"]
    radius = res["spectral_radius"]
    dfield = delta_on_grid(rs, axes) * f.values
    t = scalar_tables(rs)
    lattice = apply_D_to_lattice_sum(D, pw, axes, radius)
    bump = apply_D_to_bump(D, pw, axes)
    peak = float(np.max(np.abs(dfield)))
    rep = {
        "spectral_radius": radius,
        "Ctilde_consistent": str(t.Ctilde_consistent),
        "Ctilde_literal": str(t.Ctilde_const),
        "lattice_rel_diff": float(np.max(np.abs(dfield - float(t.Ctilde_consistent) * lattice)) / peak),
        "bump_rel_diff": float(np.max(np.abs(dfield - float(t.Ctilde_consistent) * bump)) / peak),
        "literal_rel_diff": float(np.max(np.abs(dfield - float(t.Ctilde_const) * lattice)) / peak),
    }
    if rs.rank == 1:
        rep.update(intformula_check(pw, D, f))
    rep["passed"] = rep["lattice_rel_diff"] <= tol and rep["bump_rel_diff"] <= tol and \
        rep.get("intformula_rel_diff", 0.0) <= tol
    return rep


def hypergeometric_rank_one(D, nu: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """F(m, nu, exp(i theta)) = D(e^nu + e^-nu)/(delta d(nu - rho)) for real nu (rows) and theta (columns).

    Valid away from the zeros of delta; nu must avoid the zeros of d(nu - rho).
    """
    rs = D.rs
    nu = np.asarray(nu, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = (theta / (2 * np.pi))[:, None]
    acc = np.zeros((len(nu), len(theta)), dtype=complex)
    for I, a in D.terms.items():
        av = a.eval_s(s)
        k = I[0]
        acc += (nu[:, None] ** k) * np.exp(1j * np.outer(nu, theta)) * av[None, :]
        acc += ((-nu[:, None]) ** k) * np.exp(-1j * np.outer(nu, theta)) * av[None, :]
    rho = float(rs.rho.coords[0])
    d = np.ones_like(nu)
    for k in range(rs.multiplicities[0] // 2):
        d = d * (k * k - nu ** 2) / (k * k - rho ** 2)
    delta = (2 * np.sin(theta)) ** rs.multiplicities[0]
    return (acc / (delta[None, :] * d[:, None])).real


def intformula_check(pw: PWData, D, f: GridFunction, step: float = 0.25, nu_max: float | None = None) -> dict:
    """Rank one: both integral formulas over the real line of spectral parameters.

    The first applies D to the line integral of h(nu) e^nu; the second
    integrates h(nu)/c(nu) F(m, nu, .) e(m, nu).  The measure is
    vol/(2 pi) d nu, the dual of the lattice sum over P.
    """
    rs = pw.rs
    t = scalar_tables(rs)
    if nu_max is None:
        nu_max = 400.0 / pw.R
    nu = np.arange(-nu_max, nu_max + step / 2, step)
    w = np.full(nu.shape, step * pw.vol / (2 * np.pi))
    hv = pw.h(nu[:, None])
    s = f.points_s()
    theta = 2 * np.pi * f.axes[0]
    th = np.where(theta >= np.pi, theta - 2 * np.pi, theta)
    first = np.zeros(theta.shape, dtype=complex)
    for I, a in D.terms.items():
        line = (np.exp(1j * np.outer(th, nu)) * (nu ** I[0])) @ (w * hv)
        first += a.eval_s(s) * line
    first *= float(t.Ctilde_consistent)
    dfield = delta_on_grid(rs, f.axes) * f.values
    peak = float(np.max(np.abs(dfield)))
    rel_first = float(np.max(np.abs(dfield - first)) / peak)

    # second formula on S away from the fixed point of the Weyl group
    keep = (np.abs(th) <= np.pi / 2) & (np.abs(th) >= 0.05)
    pos = nu > 0
    Fv = hypergeometric_rank_one(D, nu[pos], th[keep])
    ev = np.array([e_density(rs, (float(x),)) for x in nu[pos]], dtype=float)
    weight = 2 * w[pos] * hv[pos] * inv_c_array(rs, nu[pos][:, None]) * ev  # integrand is even in nu
    second = float(t.Ctilde_consistent) * (weight @ Fv)
    target = np.real(f.values[keep])
    ratio = float(np.dot(second, target) / np.dot(target, target))
    resid = float(np.max(np.abs(second - ratio * target)) / np.max(np.abs(target)))
    predicted = rs.weyl_order
    for a in rs.positive_roots:
        r = float(rs.mu_sub_alpha(rs.rho, a))
        for k in range(rs.m(a) // 2):
            predicted *= r * r - k * k
    return {"intformula_rel_diff": rel_first, "second_formula_ratio": ratio,
            "second_formula_predicted_ratio": predicted, "second_formula_resid": resid}


def forward_type_check(pw: PWData, D, sigmas: Sequence[float] = (0.0, 2.0, 5.0, 10.0, 20.0, 40.0),
                       nu: float = 3.0, N: int = 4096) -> dict:
    """Rank one: growth of |W| int (D* f) t^{-lam} along lam = nu + i sigma for f = bump in D_R.

    The transform of a function supported in D_R grows at most like
    e^{R sigma}; the report gives the normalized values.
    """
    from .shiftop import apply_D, formal_adjoint  # noqa: F401

    rs = pw.rs
    if rs.rank != 1:
        raise UnsupportedRank("forward type check is rank one")
    Ds = formal_adjoint(D)
    axes = cell_axes(rs, N)
    g = apply_D_to_bump(Ds, pw, axes)
    theta = 2 * np.pi * axes[0]
    th = np.where(theta > np.pi, theta - 2 * np.pi, theta)
    rows = []
    for sg in sigmas:
        lam = nu + 1j * sg
        val = rs.weyl_order * np.mean(g * np.exp(-1j * lam * th))
        rows.append({"sigma": sg, "abs": float(abs(val)), "normalized": float(abs(val) * math.exp(-pw.R * sg))})
    bound = rs.weyl_order * float(np.mean(np.abs(g)))
    return {"rows": rows, "bound": bound, "passed": all(r["normalized"] <= bound * (1 + 1e-9) for r in rows)}


def round_trip_check(f: GridFunction, level: int, tol: float = 1e-6, gate_tol: float = 1e-10,
                     synth_gate: float | None = 1e-8) -> dict:
    """synthesize(transform_numeric(f)) against f on the same grid."""
    c = transform_numeric(f, level, gate_tol)
    back = synthesize(c, f.axes, synth_gate)
    err = float(np.max(np.abs(back.values - f.values)))
    return {"level": level, "grid": [len(a) for a in f.axes], "sup_error": err,
            "quadrature_change": c.meta["quadrature_change"],
            "truncation_change": back.meta.get("truncation_change"), "passed": err <= tol}
