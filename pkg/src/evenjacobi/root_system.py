"""Reduced root systems with even multiplicities.

Vectors of the ambient space are stored as rational coordinate tuples in
the basis of simple roots, with the inner product given by an exact Gram
matrix.  Weights (elements of the lattice ``P``) are stored by their
values ``mu_a = <mu, a>/<a, a>`` at the simple roots, which are integers
exactly when ``mu`` is in ``P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from ._exact import fmt, inverse, matmul, matvec

Vec = tuple  # tuple of Fractions (root coordinates) or ints (weight coordinates)

KINDS = ("A1", "A1xA1", "A1cubed", "A2", "B2")

# Gram matrices of the simple roots.  Rank-one factors have <a, a> = 1 so
# the torus coordinate H_j equals alpha_j(H).  For B2 the long simple root
# comes first.
_GRAMS = {
    "A1": [[1]],
    "A1xA1": [[1, 0], [0, 1]],
    "A1cubed": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    "A2": [[1, Fraction(-1, 2)], [Fraction(-1, 2), 1]],
    "B2": [[2, -1], [-1, 1]],
}
_WEYL_ORDER = {"A1": 2, "A1xA1": 4, "A1cubed": 8, "A2": 6, "B2": 8}


class RootSystemError(ValueError):
    pass


@dataclass(frozen=True)
class Weight:
    """An element of ``P`` given by its integer values at the simple roots."""

    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))

    def __add__(self, other: "Weight") -> "Weight":
        return Weight(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "Weight") -> "Weight":
        return Weight(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "Weight":
        return Weight(tuple(-a for a in self.coords))

    def is_dominant(self) -> bool:
        return all(c >= 0 for c in self.coords)

    def __repr__(self):
        return f"Weight{self.coords}"


def as_coords(mu) -> tuple:
    """Weight coordinates of a ``Weight`` or a plain sequence."""
    if isinstance(mu, Weight):
        return mu.coords
    return tuple(mu)


@dataclass(frozen=True, eq=False)
class RootSystemData:
    kind: str
    multiplicities: tuple[int, ...]  # one value per Weyl orbit of roots
    gram: tuple[tuple[Fraction, ...], ...] = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, RootSystemData) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def key(self):
        return (self.kind, self.multiplicities)

    @property
    def rank(self) -> int:
        return len(self.gram)

    # -- ambient geometry -------------------------------------------------
    def ip(self, a: Sequence, b: Sequence):
        """Inner product of two vectors in root coordinates."""
        return sum((x * g * y for x, row in zip(a, self.gram) for g, y in zip(row, b)), Fraction(0))

    @cached_property
    def simple_roots(self) -> tuple[Vec, ...]:
        n = self.rank
        return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))

    @cached_property
    def _diag(self) -> tuple[Fraction, ...]:
        return tuple(self.gram[i][i] for i in range(self.rank))

    def _reflect(self, i: int, v: Vec) -> Vec:
        a = self.simple_roots[i]
        k = 2 * self.ip(v, a) / self._diag[i]
        return tuple(x - k * y for x, y in zip(v, a))

    @cached_property
    def roots(self) -> tuple[Vec, ...]:
        seen = set(self.simple_roots)
        todo = list(self.simple_roots)
        while todo:
            v = todo.pop()
            for i in range(self.rank):
                w = self._reflect(i, v)
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return tuple(sorted(seen, key=lambda r: (-sum(r), tuple(-x for x in r))))

    @cached_property
    def positive_roots(self) -> tuple[Vec, ...]:
        pos = [r for r in self.roots if all(x >= 0 for x in r)]
        return tuple(sorted(pos, key=lambda r: (sum(r), r)))

    @cached_property
    def weyl_root_matrices(self) -> tuple[tuple[tuple[Fraction, ...], ...], ...]:
        """Weyl group elements as matrices acting on root coordinates (columns = images of simple roots)."""
        n = self.rank
        ident = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
        gens = []
        for i in range(n):
            cols = [self._reflect(i, e) for e in self.simple_roots]
            gens.append(tuple(tuple(cols[j][r] for j in range(n)) for r in range(n)))
        elems = [ident]
        seen = {ident}
        k = 0
        while k < len(elems):
            g = elems[k]
            for s in gens:
                h = tuple(tuple(row) for row in matmul(s, g))
                if h not in seen:
                    seen.add(h)
                    elems.append(h)
            k += 1
        return tuple(elems)

    @cached_property
    def weyl_elements(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        """The same elements acting on weight coordinates (integer matrices)."""
        n = self.rank
        d = [[Fraction(0)] * n for _ in range(n)]
        dinv = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            d[i][i] = self._diag[i]
            dinv[i][i] = 1 / self._diag[i]
        ginv = inverse(self.gram)
        to_root = matmul(ginv, d)
        to_weight = matmul(dinv, self.gram)
        out = []
        for w in self.weyl_root_matrices:
            m = matmul(matmul(to_weight, w), to_root)
            if any(x.denominator != 1 for row in m for x in row):
                raise AssertionError("Weyl element does not preserve P")
            out.append(tuple(tuple(int(x) for x in row) for row in m))
        return tuple(out)

    @property
    def weyl_order(self) -> int:
        return len(self.weyl_elements)

    # -- multiplicities and rho --------------------------------------------
    @cached_property
    def root_orbit(self) -> dict:
        """Map each root to the index of its Weyl orbit (orbits ordered by simple roots)."""
        orbit = {}
        idx = 0
        for a in self.simple_roots:
            if a in orbit:
                continue
            for w in self.weyl_root_matrices:
                orbit[tuple(matvec(w, a))] = idx
            idx += 1
        return orbit

    @property
    def n_orbits(self) -> int:
        return len(set(self.root_orbit.values()))

    def m(self, alpha: Vec) -> int:
        try:
            return self.multiplicities[self.root_orbit[tuple(alpha)]]
        except KeyError:
            raise RootSystemError(f"{alpha} is not a root") from None

    @cached_property
    def rho_ambient(self) -> Vec:
        n = self.rank
        acc = [Fraction(0)] * n
        for a in self.positive_roots:
            for i in range(n):
                acc[i] += Fraction(self.m(a), 2) * a[i]
        return tuple(acc)

    @cached_property
    def rho(self) -> Weight:
        c = self.weight_coords_of(self.rho_ambient)
        if any(x.denominator != 1 for x in c):
            raise AssertionError("rho is not in P")
        return Weight(tuple(int(x) for x in c))

    @property
    def half_sum_m(self) -> int:
        """sum over positive roots of m_a/2."""
        return sum(self.m(a) // 2 for a in self.positive_roots)

    # -- weights ----------------------------------------------------------
    def weight_coords_of(self, v: Vec) -> tuple[Fraction, ...]:
        return tuple(self.ip(v, a) / self._diag[i] for i, a in enumerate(self.simple_roots))

    def ambient(self, mu) -> tuple[Fraction, ...]:
        """Root coordinates of a weight (or rational weight-coordinate vector)."""
        c = as_coords(mu)
        ginv = self._gram_inv
        return tuple(sum((ginv[i][j] * self._diag[j] * c[j] for j in range(self.rank)), Fraction(0)) for i in range(self.rank))

    @cached_property
    def _gram_inv(self):
        return inverse(self.gram)

    @cached_property
    def weight_gram(self) -> tuple[tuple[Fraction, ...], ...]:
        """Gram matrix of the basis dual to weight coordinates: <mu,nu> = c_mu^T Gw c_nu."""
        n = self.rank
        g = self._gram_inv
        return tuple(tuple(self._diag[i] * g[i][j] * self._diag[j] for j in range(n)) for i in range(n))

    def weight_ip(self, mu, nu):
        a, b = as_coords(mu), as_coords(nu)
        return sum((x * g * y for x, row in zip(a, self.weight_gram) for g, y in zip(row, b)), Fraction(0))

    @cached_property
    def root_weight_coefficients(self) -> dict:
        """For each positive root a, the linear form c -> mu_a on weight coordinates."""
        out = {}
        for a in self.positive_roots:
            na = self.ip(a, a)
            out[a] = tuple(a[i] * self._diag[i] / na for i in range(self.rank))
        return out

    def mu_sub_alpha(self, mu, alpha: Vec):
        """``<mu, alpha>/<alpha, alpha>`` for a root ``alpha``; ``mu`` in weight coordinates."""
        alpha = tuple(Fraction(x) for x in alpha)
        if alpha not in self.root_orbit:
            raise RootSystemError(f"{alpha} is not a root")
        c = as_coords(mu)
        na = self.ip(alpha, alpha)
        return sum((alpha[i] * self._diag[i] * c[i] for i in range(self.rank)), Fraction(0)) / na

    def weight_of_root(self, alpha: Vec) -> tuple[Fraction, ...]:
        """Weight coordinates of a root (integers only when the root itself lies in P)."""
        return self.weight_coords_of(alpha)

    def double_root_weight(self, alpha: Vec) -> Weight:
        c = self.weight_coords_of(tuple(2 * x for x in alpha))
        return Weight(tuple(int(x) for x in c))

    # -- Weyl action on weights -------------------------------------------
    def act(self, w, mu) -> tuple:
        c = as_coords(mu)
        return tuple(sum(x * y for x, y in zip(row, c)) for row in w)

    def weyl_orbit(self, mu) -> frozenset:
        return frozenset(self.act(w, mu) for w in self.weyl_elements)

    def orbit_stabilizer_size(self, mu) -> int:
        c = as_coords(mu)
        return sum(1 for w in self.weyl_elements if self.act(w, c) == tuple(c))

    def dominant_rep(self, mu) -> tuple:
        for v in self.weyl_orbit(mu):
            if all(x >= 0 for x in v):
                return tuple(v)
        raise AssertionError("orbit without a dominant point")

    # -- dominance order on the doubled system -----------------------------
    def simple_root_expansion(self, mu) -> tuple[Fraction, ...]:
        """Coefficients of ``mu`` in the basis of simple roots."""
        return self.ambient(mu)

    def dominance_leq(self, nu, mu) -> bool:
        """True iff mu - nu is a nonnegative integer combination of the doubled positive roots."""
        diff = tuple(a - b for a, b in zip(as_coords(mu), as_coords(nu)))
        k = self.simple_root_expansion(diff)
        return all(x >= 0 and (x / 2).denominator == 1 for x in k)

    def lower_cone(self, mu) -> list[Weight]:
        """Dominant weights below ``mu`` (inclusive), lowest first."""
        mu = Weight(as_coords(mu))
        if not mu.is_dominant():
            raise RootSystemError(f"{mu} is not dominant")
        c = self.simple_root_expansion(mu.coords)
        ranges = [range(int(math.floor(x / 2)) + 1) for x in c]
        out = []
        for ks in product(*ranges):
            shift = [Fraction(0)] * self.rank
            for i, k in enumerate(ks):
                for j in range(self.rank):
                    shift[j] += 2 * k * self.simple_roots[i][j]
            delta = self.weight_coords_of(tuple(shift))
            nu = tuple(int(a - b) for a, b in zip(mu.coords, delta))
            if all(x >= 0 for x in nu):
                out.append((sum(ks), Weight(nu)))
        out.sort(key=lambda p: (-p[0], p[1].coords))
        return [w for _, w in out]

    def dominant_weights(self, level: int) -> list[Weight]:
        """All of ``P+`` with every coordinate at most ``level``, in a linear extension of dominance."""
        ws = [Weight(c) for c in product(range(level + 1), repeat=self.rank)]
        return sorted(ws, key=lambda w: (sum(self.simple_root_expansion(w.coords)), w.coords))

    # -- torus geometry (floating point) -----------------------------------
    @cached_property
    def gram_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.gram])

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``G = L L^T``; root coords ``a`` map to orthonormal ``L^T a``."""
        return np.linalg.cholesky(self.gram_float)

    @cached_property
    def weight_gram_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.weight_gram])

    @cached_property
    def gamma_basis(self) -> tuple[tuple[Fraction, ...], ...]:
        """Coefficients of pi in the generators 2 pi A_a/<a,a> of Gamma (simple a), root coordinates."""
        return tuple(tuple(2 * x / self._diag[i] for x in a) for i, a in enumerate(self.simple_roots))

    @cached_property
    def gamma_matrix(self) -> np.ndarray:
        """Columns: generators of Gamma in orthonormal coordinates."""
        cols = [self.chol.T @ (np.pi * np.array([float(x) for x in g])) for g in self.gamma_basis]
        return np.array(cols).T

    def s_to_orthonormal(self, s: np.ndarray) -> np.ndarray:
        """Map fractional Gamma coordinates (shape (..., n)) to orthonormal coordinates of H."""
        return s @ self.gamma_matrix.T

    def dist_to_gamma(self, s: np.ndarray) -> np.ndarray:
        """Euclidean distance from H(s) to the lattice Gamma."""
        s = np.asarray(s, dtype=float)
        r = s - np.round(s)
        best = None
        for off in product((-1, 0, 1), repeat=self.rank):
            d = np.linalg.norm(self.s_to_orthonormal(r + np.array(off, dtype=float)), axis=-1)
            best = d if best is None else np.minimum(best, d)
        return best

    @cached_property
    def max_small_radius(self) -> float:
        """Largest R with the closed ball B_R inside {|a(H)| <= pi/2 for all roots a}."""
        longest = max(float(self.ip(a, a)) for a in self.positive_roots)
        return (math.pi / 2) / math.sqrt(longest)

    @cached_property
    def is_product_of_rank_one(self) -> bool:
        return self.kind in ("A1", "A1xA1", "A1cubed")

    def describe(self) -> dict:
        rows = []
        for a in self.positive_roots:
            ra = self.mu_sub_alpha(self.rho, a)
            rows.append({
                "root": [fmt(x) for x in a],
                "m": self.m(a),
                "rho_alpha": fmt(ra),
                "half_m": fmt(Fraction(self.m(a), 2)),
                "rho_alpha_ge_half_m": ra >= Fraction(self.m(a), 2),
            })
        return {
            "kind": self.kind,
            "multiplicities": list(self.multiplicities),
            "rank": self.rank,
            "gram": [[fmt(x) for x in row] for row in self.gram],
            "weyl_order": self.weyl_order,
            "rho": list(self.rho.coords),
            "positive_roots": rows,
            "rho_alpha_bound_holds": all(r["rho_alpha_ge_half_m"] for r in rows),
            "max_small_radius": round(self.max_small_radius, 12),
        }


def build_root_system(kind: str, multiplicities: int | Iterable[int]) -> RootSystemData:
    if kind not in _GRAMS:
        raise RootSystemError(f"unknown root system kind {kind!r}; expected one of {KINDS}")
    gram = tuple(tuple(Fraction(x) for x in row) for row in _GRAMS[kind])
    probe = RootSystemData(kind, (), gram)
    norb = probe.n_orbits
    if isinstance(multiplicities, int):
        mults = (multiplicities,) * norb
    else:
        mults = tuple(int(m) for m in multiplicities)
        if len(mults) == 1 and norb > 1:
            mults = mults * norb
    if len(mults) != norb:
        raise RootSystemError(f"{kind} has {norb} root orbits, got {len(mults)} multiplicities")
    for m in mults:
        if m <= 0 or m % 2:
            raise RootSystemError(f"multiplicities must be even and positive, got {m}")
    rs = RootSystemData(kind, mults, gram)
    if rs.weyl_order != _WEYL_ORDER[kind]:
        raise AssertionError(f"Weyl group of {kind} has order {rs.weyl_order}")
    return rs
