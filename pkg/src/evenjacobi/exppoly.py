"""Sparse exponential (Laurent) polynomials on the torus attached to a root system."""

from __future__ import annotations

import json
from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np

from ._exact import fmt, frac
from .root_system import RootSystemData, as_coords


class SystemMismatch(ValueError):
    pass


class ExpPoly:
    """Finite sum ``sum_mu coeff_mu e^mu``.

    Keys are weight-coordinate tuples.  Coordinates are integers for
    weights in ``P``; rational coordinates are allowed for the shifted
    exponentials that appear when operators act on ``e^lambda`` with
    non-lattice ``lambda``.  Coefficients are ``Fraction`` (exact) or
    ``complex`` (numerical variant).
    """

    __slots__ = ("rs", "terms")

    def __init__(self, rs: RootSystemData, terms: Mapping | None = None):
        self.rs = rs
        clean = {}
        if terms:
            for k, v in terms.items():
                if v:
                    clean[tuple(k)] = v
        self.terms: dict = clean

    # -- constructors -----------------------------------------------------
    @classmethod
    def monomial(cls, rs, mu, coeff=1) -> "ExpPoly":
        return cls(rs, {tuple(as_coords(mu)): _coerce(coeff)})

    @classmethod
    def const(cls, rs, c=1) -> "ExpPoly":
        return cls.monomial(rs, (0,) * rs.rank, c)

    # -- ring structure ---------------------------------------------------
    def _check(self, other):
        if not isinstance(other, ExpPoly):
            raise TypeError(f"expected ExpPoly, got {type(other).__name__}")
        if other.rs != self.rs:
            raise SystemMismatch(f"{self.rs.key} vs {other.rs.key}")

    def __add__(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly.const(self.rs, other)
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return ExpPoly(self.rs, out)

    __radd__ = __add__

    def __neg__(self):
        return ExpPoly(self.rs, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, ExpPoly) else -_coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "ExpPoly":
        c = _coerce(c)
        return ExpPoly(self.rs, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, ExpPoly):
            return self.scale(other)
        self._check(other)
        out = defaultdict(int)
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                out[tuple(a + b for a, b in zip(k1, k2))] += v1 * v2
        return ExpPoly(self.rs, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = ExpPoly.const(self.rs, 1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, ExpPoly):
            return self.rs == other.rs and self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.rs, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        if not self.terms:
            return "ExpPoly(0)"
        parts = [f"{fmt(v) if isinstance(v, Fraction) else v}*e^{k}" for k, v in sorted(self.terms.items())]
        return "ExpPoly(" + " + ".join(parts) + ")"

    # -- structure ----------------------------------------------------------
    def coeff(self, mu):
        return self.terms.get(tuple(as_coords(mu)), 0)

    def constant_term(self):
        """Normalized Haar integral over T."""
        return self.coeff((0,) * self.rs.rank)

    def conj_inverse(self) -> "ExpPoly":
        """Complex conjugation on T: negate weights and conjugate coefficients."""
        return ExpPoly(self.rs, {tuple(-x for x in k): _conj(v) for k, v in self.terms.items()})

    def weyl_act(self, w) -> "ExpPoly":
        return ExpPoly(self.rs, {self.rs.act(w, k): v for k, v in self.terms.items()})

    def symmetrize(self) -> "ExpPoly":
        acc = ExpPoly(self.rs)
        for w in self.rs.weyl_elements:
            acc = acc + self.weyl_act(w)
        return acc.scale(Fraction(1, self.rs.weyl_order))

    def is_invariant(self) -> bool:
        return all(self.weyl_act(w) == self for w in self.rs.weyl_elements)

    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.terms.values())

    def derivative(self, i: int) -> "ExpPoly":
        """``d_i e^mu = mu_i e^mu``: derivative along A_{a_i}/<a_i,a_i> on A."""
        return ExpPoly(self.rs, {k: v * k[i] for k, v in self.terms.items()})

    def max_abs_coord(self) -> int:
        return max((abs(x) for k in self.terms for x in k), default=0)

    # -- evaluation ---------------------------------------------------------
    def _arrays(self):
        keys = list(self.terms)
        if not keys:
            return np.zeros((0, self.rs.rank)), np.zeros(0, dtype=complex)
        k = np.array([[float(x) for x in key] for key in keys])
        c = np.array([complex(v) for v in self.terms.values()])
        return k, c

    def eval_s(self, s) -> np.ndarray:
        """Evaluate at t = exp(iH(s)) for fractional Gamma coordinates ``s`` (shape (..., n))."""
        s = np.asarray(s, dtype=float)
        k, c = self._arrays()
        if not len(c):
            return np.zeros(s.shape[:-1], dtype=complex)
        phase = np.tensordot(s, k.T, axes=(-1, 0))
        return np.exp(2j * np.pi * phase) @ c

    def eval_on_torus(self, H) -> np.ndarray:
        """Evaluate at t = exp(iH) for H in orthonormal coordinates (shape (..., n))."""
        H = np.asarray(H, dtype=float)
        s = np.linalg.solve(self.rs.gamma_matrix, H.reshape(-1, self.rs.rank).T).T
        return self.eval_s(s.reshape(H.shape))

    def eval_real_A(self, X) -> np.ndarray:
        """Evaluate at a = exp(X) in A, X in orthonormal coordinates: e^mu(a) = e^{mu(X)}."""
        X = np.asarray(X, dtype=float)
        k, c = self._arrays()
        amb = _weights_to_orthonormal(self.rs, k)
        return np.exp(np.tensordot(X, amb.T, axes=(-1, 0))) @ c

    # -- division -----------------------------------------------------------
    def divide_exact(self, divisor: "ExpPoly") -> "ExpPoly":
        """Exact Laurent division; raises ``ArithmeticError`` on a nonzero remainder."""
        self._check(divisor)
        if not divisor.terms:
            raise ZeroDivisionError("division by the zero exponential polynomial")
        if not self.terms:
            return ExpPoly(self.rs)
        n = self.rs.rank
        lo_f = [min(k[i] for k in self.terms) for i in range(n)]
        lo_d = [min(k[i] for k in divisor.terms) for i in range(n)]

        def key(e):
            return (sum(e), e)

        dv = {tuple(a - b for a, b in zip(k, lo_d)): v for k, v in divisor.terms.items()}
        lt_d = max(dv, key=key)
        rem = {tuple(a - b for a, b in zip(k, lo_f)): v for k, v in self.terms.items()}
        quot = {}
        residue = {}
        while rem:
            lt = max(rem, key=key)
            if all(a >= b for a, b in zip(lt, lt_d)):
                q = tuple(a - b for a, b in zip(lt, lt_d))
                f = _div(rem[lt], dv[lt_d])
                quot[q] = quot.get(q, 0) + f
                for k, v in dv.items():
                    kk = tuple(a + b for a, b in zip(q, k))
                    nv = rem.get(kk, 0) - f * v
                    if nv:
                        rem[kk] = nv
                    else:
                        rem.pop(kk, None)
            else:
                residue[lt] = rem.pop(lt)
        if residue:
            raise ArithmeticError("exponential polynomial is not divisible")
        shift = tuple(a - b for a, b in zip(lo_f, lo_d))
        return ExpPoly(self.rs, {tuple(a + b for a, b in zip(k, shift)): v for k, v in quot.items()})

    # -- serialization ------------------------------------------------------
    def to_json_obj(self) -> list:
        out = []
        for k, v in sorted(self.terms.items()):
            out.append({"coords": [fmt(x) if isinstance(x, Fraction) and x.denominator != 1 else int(x) for x in k],
                        "coeff": fmt(v) if isinstance(v, (int, Fraction)) else [v.real, v.imag]})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, rs, obj) -> "ExpPoly":
        terms = {}
        for t in obj:
            k = tuple(Fraction(x) if isinstance(x, str) else int(x) for x in t["coords"])
            c = t["coeff"]
            terms[k] = complex(*c) if isinstance(c, list) else Fraction(c)
        return cls(rs, terms)


def _coerce(c):
    if isinstance(c, (Fraction, complex, float)):
        return c
    return frac(c)


def _div(a, b):
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


def _conj(v):
    return v.conjugate() if isinstance(v, complex) else v


def _weights_to_orthonormal(rs, k: np.ndarray) -> np.ndarray:
    """Orthonormal coordinates of weights given by (rows of) weight coordinates."""
    d = np.diag([float(rs.gram[i][i]) for i in range(rs.rank)])
    root = k @ (np.linalg.inv(rs.gram_float) @ d).T
    return root @ rs.chol


def orbit_sum(rs: RootSystemData, mu) -> ExpPoly:
    return _orbit_sum(rs, tuple(as_coords(mu)))


@lru_cache(maxsize=None)
def _orbit_sum(rs, mu):
    return ExpPoly(rs, {nu: Fraction(1) for nu in rs.weyl_orbit(mu)})


@lru_cache(maxsize=None)
def delta_poly(rs: RootSystemData) -> ExpPoly:
    """prod_{a>0} (-1)^{m_a/2} (e^a - e^{-a})^{m_a}, written via e^{+-2a} so every weight lies in P."""
    out = ExpPoly.const(rs, 1)
    for a in rs.positive_roots:
        m = rs.m(a)
        if m % 2:
            raise ValueError("delta(m) needs even multiplicities")
        two_a = rs.double_root_weight(a)
        factor = ExpPoly(rs, {(0,) * rs.rank: Fraction(2), two_a.coords: Fraction(-1), (-two_a).coords: Fraction(-1)})
        out = out * factor ** (m // 2)
    return out


def inner_product_m(f: ExpPoly, g: ExpPoly, symmetrize: bool = False):
    """``<f, g>_m = integral over T of f conj(g) delta(m)`` as an exact constant term."""
    if symmetrize:
        f, g = f.symmetrize(), g.symmetrize()
    elif not (f.is_invariant() and g.is_invariant()):
        raise ValueError("inner_product_m expects W-invariant arguments (pass symmetrize=True)")
    return _pairing(f, g.conj_inverse(), delta_poly(f.rs))


def _pairing(f: ExpPoly, gbar: ExpPoly, w: ExpPoly):
    """Constant term of f * gbar * w without forming the full product."""
    acc = 0
    wt = w.terms
    for k1, v1 in f.terms.items():
        for k2, v2 in gbar.terms.items():
            need = tuple(-(a + b) for a, b in zip(k1, k2))
            c = wt.get(need)
            if c:
                acc += v1 * v2 * c
    return acc


def eval_on_torus(f: ExpPoly, H) -> np.ndarray:
    return f.eval_on_torus(H)
