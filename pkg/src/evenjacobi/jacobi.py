"""Jacobi polynomials by exact orthogonalization, and the scalar functions around them.

All rational identities (norms, c-functions, Plancherel density) are
evaluated in exact arithmetic.  ``lambda`` arguments are weight-coordinate
vectors (values at the simple roots); they may be rational or complex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ._exact import SingularSystemError, fmt, solve
from .exppoly import ExpPoly, _pairing, delta_poly, orbit_sum
from .root_system import RootSystemData, Weight, as_coords


class PoleError(ZeroDivisionError):
    """Evaluation at a zero of 1/c."""


class OutsideDomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scalar functions


def lam_alpha(rs: RootSystemData, lam, alpha):
    coef = rs.root_weight_coefficients[alpha]
    return sum((a * x for a, x in zip(coef, lam)), 0 * coef[0])


def _kprod(rs, factor):
    """prod over positive roots a and k = 0..m_a/2-1 of factor(a, k)."""
    out = Fraction(1)
    for a in rs.positive_roots:
        for k in range(rs.m(a) // 2):
            out = out * factor(a, k)
    return out


@dataclass(frozen=True)
class ScalarTables:
    C_const: Fraction
    Ctilde_const: Fraction  # literal constant |W|/C^2 * prod (rho_a - k)
    Ctilde_consistent: Fraction  # value forced by the norm formula: C/|W| * prod (rho_a - k)
    sign_exponent: int  # sum over positive roots of m_a/2


@lru_cache(maxsize=None)
def scalar_tables(rs: RootSystemData) -> ScalarTables:
    rho = rs.rho.coords
    C = 1 / _kprod(rs, lambda a, k: lam_alpha(rs, rho, a) + k)
    prod_rho = _kprod(rs, lambda a, k: lam_alpha(rs, rho, a) - k)
    W = rs.weyl_order
    return ScalarTables(C, Fraction(W) / C**2 * prod_rho, C / W * prod_rho, rs.half_sum_m)


def inv_c(rs: RootSystemData, lam):
    """1/c(m, lambda) = C prod_a prod_k (lambda_a + k)."""
    lam = as_coords(lam)
    C = scalar_tables(rs).C_const
    out = C
    for a in rs.positive_roots:
        la = lam_alpha(rs, lam, a)
        for k in range(rs.m(a) // 2):
            out = out * (la + k)
    return out


def c_fn(rs: RootSystemData, lam):
    v = inv_c(rs, lam)
    if v == 0:
        raise PoleError(f"c(m, lambda) has a pole at lambda = {tuple(as_coords(lam))}")
    return 1 / v


def c_star_fn(rs: RootSystemData, lam):
    t = scalar_tables(rs)
    return t.C_const * (-1) ** t.sign_exponent * c_fn(rs, lam)


def _shift(lam, mu, sign=1):
    return tuple(a + sign * b for a, b in zip(as_coords(lam), as_coords(mu)))


def d_poly(rs: RootSystemData, lam):
    """Plancherel density as the polynomial prod (k^2 - (lambda+rho)_a^2)/(k^2 - rho_a^2)."""
    rho = rs.rho.coords
    lr = _shift(lam, rho)
    out = Fraction(1)
    for a in rs.positive_roots:
        x = lam_alpha(rs, lr, a)
        r = lam_alpha(rs, rho, a)
        for k in range(rs.m(a) // 2):
            out = out * (k * k - x * x) / (k * k - r * r)
    return out


def d_quot(rs: RootSystemData, mu):
    """c(-rho) / (c(mu+rho) c(-(mu+rho)))."""
    rho = rs.rho.coords
    mr = _shift(mu, rho)
    neg = tuple(-x for x in mr)
    return c_fn(rs, tuple(-x for x in rho)) / (c_fn(rs, mr) * c_fn(rs, neg))


def e_density(rs: RootSystemData, lam):
    """e(m, lambda) = (1/C) prod (lambda_a - k)."""
    lam = as_coords(lam)
    out = 1 / scalar_tables(rs).C_const
    for a in rs.positive_roots:
        la = lam_alpha(rs, lam, a)
        for k in range(rs.m(a) // 2):
            out = out * (la - k)
    return out


def norm_sq_closed(rs: RootSystemData, mu) -> Fraction:
    """|W| prod_a prod_k (mu_a + rho_a + k)/(mu_a + rho_a - k)."""
    mr = _shift(mu, rs.rho.coords)
    out = Fraction(rs.weyl_order)
    for a in rs.positive_roots:
        x = lam_alpha(rs, mr, a)
        for k in range(rs.m(a) // 2):
            out = out * (x + k) / (x - k)
    return out


# ---------------------------------------------------------------------------
# Jacobi polynomials


@dataclass(frozen=True)
class JacobiPolynomial:
    mu: Weight
    coeffs: dict  # nu coords -> Fraction
    poly: ExpPoly
    norm_sq: Fraction

    def value_at_identity(self) -> Fraction:
        return sum((v for v in self.poly.terms.values()), Fraction(0))


@lru_cache(maxsize=None)
def _gram_entry(rs, nu, nu2):
    return _pairing(orbit_sum(rs, nu), orbit_sum(rs, nu2).conj_inverse(), delta_poly(rs))


def jacobi(rs: RootSystemData, mu) -> JacobiPolynomial:
    return _jacobi(rs, tuple(as_coords(mu)))


@lru_cache(maxsize=None)
def _jacobi(rs, mu):
    cone = [w.coords for w in rs.lower_cone(mu)]
    lower = [nu for nu in cone if nu != mu]
    a = [[_gram_entry(rs, nu, nu2) for nu in lower] for nu2 in lower]
    b = [-_gram_entry(rs, mu, nu2) for nu2 in lower]
    try:
        x = solve(a, b)
    except SingularSystemError as exc:
        raise SingularSystemError(f"Gram matrix below {mu} is singular") from exc
    coeffs = {mu: Fraction(1)}
    coeffs.update({nu: c for nu, c in zip(lower, x) if c})
    poly = ExpPoly(rs)
    for nu, c in coeffs.items():
        poly = poly + orbit_sum(rs, nu).scale(c)
    norm = sum((c * _gram_entry(rs, nu, mu) for nu, c in coeffs.items()), Fraction(0))
    if norm <= 0:
        raise SingularSystemError(f"nonpositive norm for P(m, {mu})")
    return JacobiPolynomial(Weight(mu), coeffs, poly, norm)


def norm_sq_gram(rs, mu) -> Fraction:
    P = jacobi(rs, mu).poly
    return _pairing(P, P.conj_inverse(), delta_poly(rs))


def F_at_identity(rs: RootSystemData, mu) -> Fraction:
    return c_fn(rs, _shift(mu, rs.rho.coords)) * jacobi(rs, mu).value_at_identity()


def F_value(rs: RootSystemData, mu, H) -> np.ndarray:
    """F(m, mu+rho, exp(iH)) = c(m, mu+rho) P(m, mu, exp(iH)), H in orthonormal coordinates."""
    c = float(c_fn(rs, _shift(mu, rs.rho.coords)))
    return c * jacobi(rs, mu).poly.eval_on_torus(H)


# ---------------------------------------------------------------------------
# checks and reports


def vretare_limit(rs: RootSystemData, mu, eta: Sequence | None = None,
                  eps_seq: Iterable[Fraction] | None = None, tol: float = 1e-8) -> dict:
    """Evaluate both readings of the limit formula for d(m, mu) along lambda + eps*eta.

    ``corollary``: c(-rho+e)/(c(mu+rho) c(-(mu+rho)+e));
    ``printed``:   c(-rho+e)/(c(mu+rho) c(-mu+rho+e)).
    """
    n = rs.rank
    if eta is None:
        eta = tuple(Fraction(1, 3 + 2 * i) for i in range(n))
    eta = tuple(Fraction(x) for x in eta)
    if eps_seq is None:
        eps_seq = [Fraction(1, 10**k) for k in range(3, 13)]
    eps_seq = list(eps_seq)
    rho = rs.rho.coords
    mr = _shift(mu, rho)

    def value(target, e):
        num_arg = tuple(-r + e * h for r, h in zip(rho, eta))
        den_arg = tuple(t + e * h for t, h in zip(target, eta))
        return inv_c(rs, mr) * inv_c(rs, den_arg) / inv_c(rs, num_arg)

    out = {}
    for name, target in (("corollary", tuple(-x for x in mr)),
                         ("printed", tuple(-a + r for a, r in zip(as_coords(mu), rho)))):
        vals = [value(target, e) for e in eps_seq]
        last, prev = float(vals[-1]), float(vals[-2])
        converged = abs(last - prev) <= tol * max(1.0, abs(last))
        out[name] = {"value": last, "converged": converged, "sequence": [float(v) for v in vals]}
    out["d_quot"] = float(d_quot(rs, mu))
    return out


def laplacian_eigen_check(rs: RootSystemData, mu) -> bool:
    """Exact check of L(m) P = -<mu+2rho, mu> P with denominators cleared.

    Conventions: L_T e^nu = -<nu,nu> e^nu and d_{i a} e^nu = <nu,a> e^nu.
    """
    P = jacobi(rs, mu).poly
    one = ExpPoly.const(rs, 1)
    facs = {}
    for a in rs.positive_roots:
        t = rs.double_root_weight(a)
        facs[a] = (one - ExpPoly.monomial(rs, (-t).coords), one + ExpPoly.monomial(rs, (-t).coords))
    Q = one
    for a in rs.positive_roots:
        Q = Q * facs[a][0]
    LP = ExpPoly(rs, {k: -rs.weight_ip(k, k) * v for k, v in P.terms.items()})
    total = Q * LP
    for a in rs.positive_roots:
        na = rs.ip(a, a)
        dP = ExpPoly(rs, {k: rs.mu_sub_alpha(k, a) * na * v for k, v in P.terms.items()})
        rest = one
        for b in rs.positive_roots:
            if b != a:
                rest = rest * facs[b][0]
        total = total - (facs[a][1] * rest * dP).scale(rs.m(a))
    two_rho = tuple(2 * x for x in rs.rho.coords)
    ev = rs.weight_ip(_shift(mu, two_rho), mu)
    total = total + (Q * P).scale(ev)
    if total:
        raise AssertionError(f"eigen-identity fails for mu = {tuple(as_coords(mu))}")
    return True


def _in_small_domain(rs, H) -> bool:
    H = np.asarray(H, dtype=float)
    for a in rs.positive_roots:
        av = rs.chol.T @ np.array([float(x) for x in a])
        if abs(float(av @ H)) > math.pi / 2 + 1e-12:
            return False
    return True


def derivative_on_torus(rs, P: ExpPoly, H, I: Sequence[int]) -> complex:
    """Partial derivative d^I P at exp(iH) along the orthonormal basis of t."""
    from .exppoly import _weights_to_orthonormal
    k, c = P._arrays()
    amb = _weights_to_orthonormal(rs, k)
    H = np.asarray(H, dtype=float)
    fac = np.ones(len(c), dtype=complex)
    for j, ij in enumerate(I):
        fac = fac * (1j * amb[:, j]) ** ij
    return complex(np.sum(c * fac * np.exp(1j * amb @ H)))


def estimate_report(rs: RootSystemData, H_samples, level: int, I: Sequence[int] | None = None,
                    bound: float = 1.5) -> dict:
    """Normalized growth of |d^I P(m, mu, exp(iH))| over the weights with coordinates <= level."""
    if I is None:
        I = (0,) * rs.rank
    I = tuple(I)
    H_samples = [np.asarray(h, dtype=float) for h in H_samples]
    for h in H_samples:
        if not _in_small_domain(rs, h):
            raise OutsideDomainError(f"H = {h.tolist()} is outside |a(H)| <= pi/2")
    power = sum(I) + rs.half_sum_m
    weights = rs.dominant_weights(level)
    half = level / 2
    per_point = []
    for h in H_samples:
        low, high = 0.0, 0.0
        for w in weights:
            P = jacobi(rs, w).poly
            val = abs(derivative_on_torus(rs, P, h, I))
            norm_mu = math.sqrt(float(rs.weight_ip(w.coords, w.coords)))
            r = val * (1 + norm_mu) ** (-power)
            if max(w.coords) <= half:
                low = max(low, r)
            else:
                high = max(high, r)
        ratio = high / low if low > 0 else (0.0 if high == 0 else math.inf)
        per_point.append({"H": h.tolist(), "sup_low": low, "sup_high": high, "ratio": ratio,
                          "passed": ratio <= bound})
    return {"I": list(I), "level": level, "bound": bound, "points": per_point,
            "passed": all(p["passed"] for p in per_point)}


def jacobi_table(rs: RootSystemData, level: int) -> list[dict]:
    """One row per (mu, nu) pair: the expansion coefficients of every P(m, mu) up to ``level``."""
    rows = []
    for w in rs.dominant_weights(level):
        J = jacobi(rs, w)
        for nu, c in sorted(J.coeffs.items()):
            rows.append({
                "mu_coords": " ".join(map(str, w.coords)),
                "nu_coords": " ".join(map(str, nu)),
                "c_munu_num": c.numerator,
                "c_munu_den": c.denominator,
                "norm_sq": fmt(J.norm_sq),
            })
    return rows


def jacobi_summary(rs: RootSystemData, level: int) -> list[dict]:
    """One row per dominant weight with the exact identities side by side."""
    rows = []
    for w in rs.dominant_weights(level):
        J = jacobi(rs, w)
        rows.append({
            "mu_coords": " ".join(map(str, w.coords)),
            "c_munu": ";".join(f"{' '.join(map(str, nu))}:{fmt(c)}" for nu, c in sorted(J.coeffs.items())),
            "norm_sq_gram": fmt(J.norm_sq),
            "norm_sq_closed": fmt(norm_sq_closed(rs, w)),
            "d": fmt(d_poly(rs, w.coords)),
            "d_quot": fmt(d_quot(rs, w)),
            "F_at_identity": fmt(F_at_identity(rs, w)),
        })
    return rows
