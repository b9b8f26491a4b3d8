# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled longest-common-subsequence kernel.

Mirrors the pure-Python fallback in kernels.py exactly, including the
backtracking tie-break (match when symbols agree, otherwise step back
through the first sequence first).
"""

from libc.stdlib cimport free, malloc


def lcs_pairs(a, b):
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    if n == 0 or m == 0:
        return []
    cdef Py_ssize_t width = m + 1
    cdef int *table = <int *> malloc((n + 1) * width * sizeof(int))
    if table == NULL:
        raise MemoryError()
    cdef int *ea = <int *> malloc(n * sizeof(int))
    cdef int *eb = <int *> malloc(m * sizeof(int))
    if ea == NULL or eb == NULL:
        free(table)
        if ea != NULL:
            free(ea)
        if eb != NULL:
            free(eb)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef int up, left
    try:
        for i in range(n):
            ea[i] = a[i]
        for j in range(m):
            eb[j] = b[j]
        for j in range(width):
            table[j] = 0
        for i in range(1, n + 1):
            table[i * width] = 0
            for j in range(1, m + 1):
                if ea[i - 1] == eb[j - 1]:
                    table[i * width + j] = table[(i - 1) * width + j - 1] + 1
                else:
                    up = table[(i - 1) * width + j]
                    left = table[i * width + j - 1]
                    table[i * width + j] = up if up >= left else left
        pairs = []
        i = n
        j = m
        while i > 0 and j > 0:
            if ea[i - 1] == eb[j - 1]:
                pairs.append((i - 1, j - 1))
                i -= 1
                j -= 1
            elif table[(i - 1) * width + j] >= table[i * width + j - 1]:
                i -= 1
            else:
                j -= 1
        pairs.reverse()
        return pairs
    finally:
        free(table)
        free(ea)
        free(eb)


def lcs_length(a, b):
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    if n == 0 or m == 0:
        return 0
    cdef int *prev = <int *> malloc((m + 1) * sizeof(int))
    cdef int *cur = <int *> malloc((m + 1) * sizeof(int))
    cdef int *eb = <int *> malloc(m * sizeof(int))
    if prev == NULL or cur == NULL or eb == NULL:
        if prev != NULL:
            free(prev)
        if cur != NULL:
            free(cur)
        if eb != NULL:
            free(eb)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef int ai, up, left, out
    cdef int *tmp
    try:
        for j in range(m):
            eb[j] = b[j]
        for j in range(m + 1):
            prev[j] = 0
            cur[j] = 0
        for i in range(1, n + 1):
            ai = a[i - 1]
            for j in range(1, m + 1):
                if ai == eb[j - 1]:
                    cur[j] = prev[j - 1] + 1
                else:
                    up = prev[j]
                    left = cur[j - 1]
                    cur[j] = up if up >= left else left
            tmp = prev
            prev = cur
            cur = tmp
        out = prev[m]
        return out
    finally:
        free(prev)
        free(cur)
        free(eb)
