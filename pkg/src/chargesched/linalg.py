"""Small exact-rational linear algebra: just enough Gaussian elimination to
evaluate Markov chains without floating error."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def solve(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Solve a x = b by Gaussian elimination with partial (nonzero) pivoting.

    Raises ValueError on a singular system.
    """
    n = len(a)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular system")
        m[col], m[pivot] = m[pivot], m[col]
        inv = Fraction(1) / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def stationary_distribution(p: Sequence[Sequence[Fraction]]) -> tuple[Fraction, ...]:
    """Stationary distribution pi of an irreducible stochastic matrix:
    pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1."""
    n = len(p)
    a = [[p[r][c] - (1 if r == c else 0) for r in range(n)] for c in range(n)]
    a[n - 1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    pi = solve(a, b)
    if any(x < 0 for x in pi):
        raise ValueError("stationary solve produced negatives; chain not irreducible?")
    return tuple(pi)


def chain_average(p: Sequence[Sequence[Fraction]], cost: Sequence[Fraction]) -> Fraction:
    """Long-run average cost of an irreducible chain with per-state costs."""
    pi = stationary_distribution(p)
    return sum((pi[i] * cost[i] for i in range(len(cost))), Fraction(0))
