"""Small exact linear algebra over ``Fraction``."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Q = Fraction


class SingularSystemError(ArithmeticError):
    pass


def frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        raise TypeError("refusing to coerce a float into exact arithmetic")
    return Fraction(x)


def fmt(q) -> str:
    """Render a rational as ``p/q`` (or ``p`` for integers)."""
    q = frac(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def matmul(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def matvec(a: Sequence[Sequence[Fraction]], v: Sequence[Fraction]) -> list[Fraction]:
    return [sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a]


def inverse(a: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(a)
    aug = [[frac(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    _rref_inplace(aug, n)
    for i in range(n):
        if aug[i][i] != 1:
            raise SingularSystemError("matrix is singular")
    return [row[n:] for row in aug]


def solve(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction]:
    """Solve a square nonsingular system exactly."""
    n = len(a)
    if n == 0:
        return []
    aug = [[frac(x) for x in row] + [frac(bi)] for row, bi in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularSystemError(f"singular matrix at column {col}")
        aug[col], aug[piv] = aug[piv], aug[col]
        prow = aug[col]
        inv = 1 / prow[col]
        for r in range(col + 1, n):
            row = aug[r]
            f = row[col]
            if f:
                f *= inv
                for c in range(col, n + 1):
                    if prow[c]:
                        row[c] -= f * prow[c]
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        s = aug[i][n] - sum((aug[i][j] * x[j] for j in range(i + 1, n)), Fraction(0))
        x[i] = s / aug[i][i]
    return x


def _rref_inplace(m: list[list[Fraction]], ncols: int) -> list[int]:
    pivots = []
    r = 0
    rows = len(m)
    for c in range(ncols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        prow = m[r]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], prow)]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return pivots


def solve_least_support(rows: list[dict[int, Fraction]], rhs: list[Fraction], nvars: int):
    """Solve a (possibly over/underdetermined) sparse system exactly.

    Rows are eliminated incrementally, so long systems with few unknowns
    stay cheap.  Returns ``(x, rank, nullity, inconsistent_rows)``: ``x``
    is the particular solution with every free variable set to zero, or
    ``None`` when some row reduces to ``0 = b`` with ``b != 0``.
    """
    pivots: dict[int, tuple[dict[int, Fraction], Fraction]] = {}
    bad = 0
    for row, b in zip(rows, rhs):
        r = {j: frac(v) for j, v in row.items() if v}
        b = frac(b)
        while True:
            hit = [j for j in r if j in pivots]
            if not hit:
                break
            j = min(hit)
            f = r[j]
            prow, pb = pivots[j]
            for c, v in prow.items():
                nv = r.get(c, 0) - f * v
                if nv:
                    r[c] = nv
                else:
                    r.pop(c, None)
            b -= f * pb
        if not r:
            if b != 0:
                bad += 1
            continue
        lead = min(r)
        inv = 1 / r[lead]
        pivots[lead] = ({c: v * inv for c, v in r.items()}, b * inv)
    rank = len(pivots)
    if bad:
        return None, rank, nvars - rank, bad
    x = [Fraction(0)] * nvars
    for p in sorted(pivots, reverse=True):
        prow, pb = pivots[p]
        x[p] = pb - sum((v * x[c] for c, v in prow.items() if c != p), Fraction(0))
    return x, rank, nvars - rank, 0
