"""Vectorized floating-point helpers shared by the transform and wave solvers."""

from __future__ import annotations

import numpy as np

from .jacobi import jacobi, scalar_tables
from .root_system import RootSystemData


def rank_one_basis(m: int, nmax: int, theta: np.ndarray) -> np.ndarray:
    """Rows n = 0..nmax of P(m, n, exp(i theta)) for A1 with multiplicity m.

    Three-term recurrence in the normalization where e^{n a} has
    coefficient one:  P_{n+1} = 2x P_n - n(n+2l-1)/((n+l-1)(n+l)) P_{n-1},
    x = cos(theta), l = m/2.
    """
    lam = m / 2
    x = np.cos(np.asarray(theta, dtype=float))
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 2 * x
    for n in range(1, nmax):
        b = n * (n + 2 * lam - 1) / ((n + lam - 1) * (n + lam))
        out[n + 1] = 2 * x * out[n] - b * out[n - 1]
    return out


def root_forms(rs: RootSystemData) -> tuple[np.ndarray, np.ndarray]:
    """Matrix of the linear forms lam -> lam_a (rows) and the half multiplicities."""
    forms = np.array([[float(c) for c in rs.root_weight_coefficients[a]] for a in rs.positive_roots])
    half = np.array([rs.m(a) // 2 for a in rs.positive_roots])
    return forms, half


def inv_c_array(rs: RootSystemData, lam: np.ndarray) -> np.ndarray:
    """1/c(m, lam) for an array of weight-coordinate vectors (last axis), complex allowed."""
    lam = np.asarray(lam)
    forms, half = root_forms(rs)
    la = lam @ forms.T
    out = np.full(lam.shape[:-1], float(scalar_tables(rs).C_const), dtype=np.result_type(lam, float))
    for j, h in enumerate(half):
        for k in range(h):
            out = out * (la[..., j] + k)
    return out


def norm_sq_array(rs: RootSystemData, mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    rho = np.array(rs.rho.coords, dtype=float)
    forms, half = root_forms(rs)
    x = (mu + rho) @ forms.T
    out = np.full(mu.shape[:-1], float(rs.weyl_order))
    for j, h in enumerate(half):
        for k in range(h):
            out = out * (x[..., j] + k) / (x[..., j] - k)
    return out


def weight_norm(rs: RootSystemData, lam: np.ndarray) -> np.ndarray:
    """Euclidean norm of weights given in weight coordinates (complex-safe, no conjugation)."""
    lam = np.asarray(lam)
    g = rs.weight_gram_float
    q = np.einsum("...i,ij,...j->...", lam, g, lam)
    return np.sqrt(q + 0j) if np.iscomplexobj(q) else np.sqrt(q)


def factor_multiplicities(rs: RootSystemData) -> list[int]:
    if not rs.is_product_of_rank_one:
        raise ValueError(f"{rs.kind} is not a product of rank-one systems")
    return list(rs.multiplicities) if len(rs.multiplicities) == rs.rank else [rs.multiplicities[0]] * rs.rank


def generic_basis(rs: RootSystemData, weights, s_points: np.ndarray) -> np.ndarray:
    """P(m, mu) from the exact polynomials, evaluated at fractional coordinates (rows: weights)."""
    return np.array([jacobi(rs, tuple(w)).poly.eval_s(s_points).real for w in weights])


def contract_axes(coeffs: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    """sum_n coeffs[n1..nk] prod_j mats[j][n_j, x_j] as an array over (x_1..x_k)."""
    out = coeffs
    for M in mats:
        out = np.tensordot(out, M, axes=([0], [0]))
    return out
