"""Sequence-matching kernels with an optional compiled backend.

The longest-common-subsequence routine sits on the hot path of span
mapping (every generated follow-up question is aligned against its
source snippet), so a Cython build of the same algorithm is used when
available.  Both backends implement identical tie-breaking and are
tested for exact agreement; set ``RULECHAT_PURE_KERNELS=1`` to force
the interpreted version.
"""

from __future__ import annotations

import os
from typing import Sequence


def _py_lcs_pairs(a: Sequence[int], b: Sequence[int]) -> list[tuple[int, int]]:
    """Matched index pairs of one longest common subsequence of a and b.

    Backtracking prefers a match whenever the current symbols agree,
    and otherwise steps back through ``a`` before ``b`` on ties, so the
    returned alignment is deterministic.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return []
    width = m + 1
    table = [0] * ((n + 1) * width)
    for i in range(1, n + 1):
        ai = a[i - 1]
        row = i * width
        prev = row - width
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                table[row + j] = table[prev + j - 1] + 1
            else:
                up = table[prev + j]
                left = table[row + j - 1]
                table[row + j] = up if up >= left else left
    pairs: list[tuple[int, int]] = []
    i, j = n, m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[(i - 1) * width + j] >= table[i * width + j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def _py_lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = cur[j - 1]
                cur[j] = up if up >= left else left
        prev, cur = cur, prev
    return prev[m]


_native = None
if not os.environ.get("RULECHAT_PURE_KERNELS"):
    try:
        from . import _lcs_native as _native  # type: ignore[attr-defined]
    except ImportError:
        _native = None

if _native is not None:
    lcs_pairs = _native.lcs_pairs
    lcs_length = _native.lcs_length
    BACKEND = "native"
else:
    lcs_pairs = _py_lcs_pairs
    lcs_length = _py_lcs_length
    BACKEND = "pure"


def backend_name() -> str:
    """Which LCS implementation was selected at import time."""
    return BACKEND


def lcs_token_pairs(
    a_tokens: Sequence[str], b_tokens: Sequence[str]
) -> list[tuple[int, int]]:
    """LCS alignment over token sequences, as (index_in_a, index_in_b) pairs."""
    vocab: dict[str, int] = {}
    ea = [vocab.setdefault(t, len(vocab)) for t in a_tokens]
    eb = [vocab.setdefault(t, len(vocab)) for t in b_tokens]
    return lcs_pairs(ea, eb)
