"""Matrix permanents via Ryser's inclusion-exclusion formula.

The permanent drives every multi-photon transition amplitude, so this is the
hot inner loop of state evolution. Ryser's formula with Gray-code ordering
updates the column-sum vector by a single column per subset, giving
O(2^n * n) arithmetic. Dimensions above ``MAX_DIMENSION`` are rejected
rather than silently allowed to crawl.
"""

from __future__ import annotations

from typing import Sequence

from .errors import PermanentSizeError

MAX_DIMENSION = 16


def permanent(matrix: Sequence[Sequence[complex]]) -> complex:
    """Permanent of a square complex matrix.

    Accepts any nested sequence (numpy arrays included). Sizes n <= 3 use the
    explicit expansions, larger sizes use Gray-coded Ryser.
    """
    rows = [list(map(complex, row)) for row in matrix]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("permanent requires a square matrix")
    if n > MAX_DIMENSION:
        raise PermanentSizeError(f"dimension {n} exceeds cap {MAX_DIMENSION}")
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] + rows[0][1] * rows[1][0]
    if n == 3:
        (a, b, c), (d, e, f), (g, h, i) = rows
        return a * (e * i + f * h) + b * (d * i + f * g) + c * (d * h + e * g)
    return _ryser_gray(rows, n)


def _ryser_gray(rows: list[list[complex]], n: int) -> complex:
    # perm(A) = (-1)^n sum_{S != empty} (-1)^{|S|} prod_i (sum_{j in S} A_ij),
    # iterated in Gray-code order so each step touches one column.
    cols = [[rows[i][j] for i in range(n)] for j in range(n)]
    sums = [0j] * n
    total = 0j
    gray = 0
    bits = 0
    for k in range(1, 1 << n):
        new_gray = k ^ (k >> 1)
        diff = new_gray ^ gray
        j = diff.bit_length() - 1
        col = cols[j]
        if new_gray & diff:
            for i in range(n):
                sums[i] += col[i]
            bits += 1
        else:
            for i in range(n):
                sums[i] -= col[i]
            bits -= 1
        gray = new_gray
        prod = 1.0 + 0j
        for v in sums:
            prod *= v
        if (n - bits) & 1:
            total -= prod
        else:
            total += prod
    return total
