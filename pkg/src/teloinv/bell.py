"""Partial and complete Bell polynomials.

``x`` is always indexed from one in the mathematical sense: ``x[0]`` holds
``x_1``.  The functions are generic over the number type, so integer or
``Fraction`` inputs give exact results and ``mpf`` inputs keep full precision.
"""
from __future__ import annotations

from math import comb, factorial
from typing import Iterator, Sequence


def _multi_indices(n: int, k: int, top: int) -> Iterator[list[int]]:
    """Vectors (j_1..j_top) of nonnegative integers with sum k and sum i*j_i = n."""

    def rec(i: int, blocks_left: int, weight_left: int, acc: list[int]):
        if i == 0:
            if blocks_left == 0 and weight_left == 0:
                yield acc[::-1]
            return
        # j_i blocks of size i; the rest must fit in sizes 1..i-1
        for j in range(min(blocks_left, weight_left // i), -1, -1):
            rest_blocks = blocks_left - j
            rest_weight = weight_left - i * j
            if rest_blocks > rest_weight or rest_weight > rest_blocks * (i - 1):
                continue
            acc.append(j)
            yield from rec(i - 1, rest_blocks, rest_weight, acc)
            acc.pop()

    yield from rec(top, k, n, [])


def bell_partial(n: int, k: int, x: Sequence):
    """Partial Bell polynomial B_{n,k}(x_1, ..., x_{n-k+1})."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if n == 0:
        return 1
    if k == 0:
        return 0
    top = n - k + 1
    if len(x) < top:
        raise ValueError(f"need {top} arguments, got {len(x)}")
    total = 0
    for js in _multi_indices(n, k, top):
        coeff = factorial(n)
        term = 1
        for i, j in enumerate(js, start=1):
            if j:
                coeff //= factorial(j) * factorial(i) ** j
                term = term * x[i - 1] ** j
        total = total + coeff * term
    return total


def bell_complete(n: int, x: Sequence):
    """Complete Bell polynomial B_n(x_1, ..., x_n), with B_0 = 1."""
    if n == 0:
        return 1
    return sum((bell_partial(n, k, x) for k in range(1, n + 1)), 0)


def bell_table(n_max: int, x: Sequence, zero=0, one=1) -> list[list]:
    """All B_{n,k}(x) for 0 <= k <= n <= n_max.

    Uses B_{n,k} = sum_{m=1}^{n-k+1} C(n-1, m-1) x_m B_{n-m,k-1}, which costs
    O(n_max^3) operations instead of enumerating integer partitions.
    """
    table = [[zero] * (n + 1) for n in range(n_max + 1)]
    table[0][0] = one
    for n in range(1, n_max + 1):
        row = table[n]
        for k in range(1, n + 1):
            acc = zero
            for m in range(1, n - k + 2):
                prev = table[n - m][k - 1]
                if prev:
                    acc = acc + comb(n - 1, m - 1) * x[m - 1] * prev
            row[k] = acc
    return table
