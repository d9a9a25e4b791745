"""Dense linear algebra over GF(2).

Bit vectors and bit matrices are plain ``numpy.uint8`` arrays holding 0/1.
Rank computation packs each row into a Python integer and eliminates with
XOR, which is much faster than per-element numpy work for the small
matrices used by the stabilizer sampler.
"""

from __future__ import annotations

import numpy as np

MAX_RANK_RETRIES = 10_000


def _is_binary(a: np.ndarray) -> bool:
    if a.dtype == np.uint8:
        return not (a > 1).any()
    return bool(((a == 0) | (a == 1)).all())


def bit_vector(bits) -> np.ndarray:
    """Validate and convert ``bits`` to a 1-D uint8 array of 0/1 values."""
    v = np.asarray(bits)
    if v.ndim != 1:
        raise ValueError(f"bit vector must be 1-D, got shape {v.shape}")
    if not _is_binary(v):
        raise ValueError("bit vector entries must be 0 or 1")
    return v.astype(np.uint8)


def bit_matrix(rows) -> np.ndarray:
    """Validate and convert ``rows`` to a non-empty 2-D uint8 array of 0/1 values."""
    m = np.asarray(rows)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"bit matrix must be 2-D and non-empty, got shape {m.shape}")
    if not _is_binary(m):
        raise ValueError("bit matrix entries must be 0 or 1")
    return m.astype(np.uint8)


def _pack_rows(m: np.ndarray) -> list[int]:
    """Pack each row of a 0/1 matrix into an integer (column j -> bit j)."""
    if m.shape[1] <= 62:
        return (m.astype(np.int64) @ (1 << np.arange(m.shape[1], dtype=np.int64))).tolist()
    return [int("".join(map(str, row[::-1])), 2) for row in m.tolist()]


def rank_gf2(m) -> int:
    """Rank of a binary matrix over GF(2).

    The input is not modified.

    >>> rank_gf2([[1, 0, 1], [0, 1, 1], [1, 1, 0]])
    2
    """
    return _rank_packed(_pack_rows(bit_matrix(m)))


def _rank_packed(rows: list[int]) -> int:
    # XOR basis keyed by leading bit
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            lead = r.bit_length() - 1
            b = basis.get(lead)
            if b is None:
                basis[lead] = r
                break
            r ^= b
    return len(basis)


def matvec_gf2(m, v) -> np.ndarray:
    """Matrix-vector product ``m @ v`` with arithmetic mod 2."""
    m = bit_matrix(m)
    v = bit_vector(v)
    if v.shape[0] != m.shape[1]:
        raise ValueError(f"dimension mismatch: matrix has {m.shape[1]} columns, vector has length {v.shape[0]}")
    return ((m.astype(np.int64) @ v.astype(np.int64)) % 2).astype(np.uint8)


def quadratic_form_gf2(q, x) -> int:
    """Return ``x^T q x mod 2``."""
    q = bit_matrix(q)
    x = bit_vector(x)
    k = x.shape[0]
    if q.shape != (k, k):
        raise ValueError(f"dimension mismatch: form is {q.shape}, vector has length {k}")
    xi = x.astype(np.int64)
    return int(xi @ q.astype(np.int64) @ xi) % 2


def linear_form_gf2(c, x) -> tuple[int, int]:
    """Evaluate the linear form ``c^T x``.

    Returns:
        ``(parity, dot)`` where ``dot`` is the integer count of shared ones
        (needed for powers of ``i``) and ``parity = dot mod 2``.
    """
    c = bit_vector(c)
    x = bit_vector(x)
    if c.shape != x.shape:
        raise ValueError(f"dimension mismatch: {c.shape[0]} vs {x.shape[0]}")
    dot = int(c.astype(np.int64) @ x.astype(np.int64))
    return dot % 2, dot


def random_full_rank_matrix(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random ``n x k`` binary matrix of rank ``k``.

    Whole matrices of fair bits are redrawn until one has full column rank,
    so every rank-``k`` matrix is equally likely.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    for _ in range(MAX_RANK_RETRIES):
        r = rng.integers(0, 2, size=(n, k), dtype=np.uint8)
        # column rank == row rank; pack the k columns
        if _rank_packed(_pack_rows(r.T)) == k:
            return r
    raise RuntimeError(f"no rank-{k} matrix after {MAX_RANK_RETRIES} draws; random source is broken")
