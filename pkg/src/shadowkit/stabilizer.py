"""Uniform sampling of random stabilizer states as explicit amplitude vectors.

A stabilizer state with ``2**k`` nonzero amplitudes is written as::

    |psi> = 2**(-k/2) * sum_x (-1)**(x.Q.x) * i**(c.x) |R x + t>

with ``x`` running over ``F_2^k``, ``R`` an ``n x k`` binary matrix of rank
``k`` and ``Q``, ``c``, ``t`` fair random bits. The exponent of ``i`` is the
integer dot product ``c.x`` taken mod 4 (not its parity).

Index convention: the computational-basis index of a bit string
``(y_1, ..., y_n)`` is ``sum_j y_j 2**(n - j)``, i.e. qubit 1 is the most
significant bit and bit 0 of the index is the last qubit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gf2 import MAX_RANK_RETRIES, _is_binary, random_full_rank_matrix, rank_gf2

_I_POWERS = np.array([1, 1j, -1, -1j], dtype=complex)
MAX_SAMPLE_QUBITS = 12
MAX_ENUMERATE_QUBITS = 3


@dataclass(frozen=True)
class StabilizerParams:
    """Parameters ``(k, Q, c, R, t)`` of a stabilizer state on ``n`` qubits."""

    n: int
    k: int
    Q: np.ndarray
    c: np.ndarray
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        n, k = self.n, self.k
        if not 0 <= k <= n:
            raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
        expected = {"Q": (k, k), "c": (k,), "R": (n, k), "t": (n,)}
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not _is_binary(arr):
                raise ValueError(f"{name} entries must be 0 or 1")
            if arr.dtype != np.uint8:
                object.__setattr__(self, name, arr.astype(np.uint8))


# -- cardinalities -------------------------------------------------------------


def total_cardinality(n: int) -> int:
    """Number of ``n``-qubit stabilizer states, ``2**n * prod_{k=1..n} (2**k + 1)``."""
    if not 1 <= n <= 64:
        raise ValueError(f"n must be in [1, 64], got {n}")
    return 2**n * math.prod(2**k + 1 for k in range(1, n + 1))


def gaussian_binomial(n: int, k: int) -> int:
    """Gaussian 2-binomial coefficient: number of ``k``-dim subspaces of ``F_2^n``."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    num = math.prod(2**n - 2**j for j in range(k))
    den = math.prod(2**k - 2**j for j in range(k))
    q, r = divmod(num, den)
    assert r == 0
    return q


def stratum_cardinality(n: int, k: int) -> int:
    """Number of ``n``-qubit stabilizer states with exactly ``2**k`` nonzero amplitudes."""
    return 2 ** (n + k * (k + 1) // 2) * gaussian_binomial(n, k)


@lru_cache(maxsize=None)
def _stratum_cdf(n: int) -> tuple[int, ...]:
    acc, out = 0, []
    for k in range(n + 1):
        acc += stratum_cardinality(n, k)
        out.append(acc)
    return tuple(out)


def _randbelow(rng: np.random.Generator, m: int) -> int:
    """Uniform integer in ``[0, m)`` for arbitrarily large ``m``."""
    if m <= 2**63:
        return int(rng.integers(0, m))
    nbits = m.bit_length()
    nbytes = (nbits + 7) // 8
    excess = 8 * nbytes - nbits
    while True:
        u = int.from_bytes(rng.bytes(nbytes), "little") >> excess
        if u < m:
            return u


def sample_support_exponent(n: int, rng: np.random.Generator) -> int:
    """Draw ``k`` with probability ``C(n, k) / C(n)`` using exact integer arithmetic."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cdf = _stratum_cdf(n)
    u = _randbelow(rng, cdf[-1])
    for k, upper in enumerate(cdf):
        if u < upper:
            return k
    raise AssertionError("unreachable")


# -- state construction --------------------------------------------------------


@lru_cache(maxsize=None)
def _x_table(k: int) -> np.ndarray:
    """All vectors of ``F_2^k`` as rows, in integer order with MSB first."""
    x = np.arange(2**k)
    shifts = np.arange(k - 1, -1, -1)
    table = ((x[:, None] >> shifts) & 1).astype(np.int64)
    table.setflags(write=False)
    return table


def _msb_weights(n: int) -> np.ndarray:
    return 1 << np.arange(n - 1, -1, -1, dtype=np.int64)


def bits_to_index(bits) -> int:
    """Computational-basis index of a bit string (first qubit most significant)."""
    bits = np.asarray(bits, dtype=np.int64)
    return int(bits @ _msb_weights(bits.shape[0]))


def build_state(params: StabilizerParams) -> np.ndarray:
    """Explicit ``2**n`` amplitude vector for the given stabilizer parameters."""
    n, k = params.n, params.k
    psi = np.zeros(2**n, dtype=complex)
    t_index = bits_to_index(params.t)
    if k == 0:
        psi[t_index] = 1.0
        return psi
    if rank_gf2(params.R) != k:
        raise ValueError(f"R must have rank {k}")
    x = _x_table(k)
    # support indices R x + t
    idx = ((x @ params.R.T.astype(np.int64)) % 2) @ _msb_weights(n) ^ t_index
    quad = ((x @ params.Q.astype(np.int64)) * x).sum(axis=1) % 2
    dot = x @ params.c.astype(np.int64)
    psi[idx] = _I_POWERS[(2 * quad + dot) % 4] * 2.0 ** (-k / 2)
    return psi


def sample_stabilizer_params(n: int, rng: np.random.Generator) -> StabilizerParams:
    """Draw ``(k, Q, c, R, t)`` so that the resulting state is uniform over all stabilizer states."""
    k = sample_support_exponent(n, rng)
    bits = rng.integers(0, 2, size=k * k + k + n, dtype=np.uint8)
    Q = bits[: k * k].reshape(k, k)
    c = bits[k * k : k * k + k]
    t = bits[k * k + k :]
    R = random_full_rank_matrix(n, k, rng) if k else np.zeros((n, 0), dtype=np.uint8)
    return StabilizerParams(n, k, Q, c, R, t)


def sample_stabilizer_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random ``n``-qubit stabilizer state as an amplitude vector."""
    if not 1 <= n <= MAX_SAMPLE_QUBITS:
        raise ValueError(f"n must be in [1, {MAX_SAMPLE_QUBITS}], got {n}")
    return build_state(sample_stabilizer_params(n, rng))


def _sample_support_exponents(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    cdf = _stratum_cdf(n)
    if cdf[-1] > 2**63:
        return np.array([sample_support_exponent(n, rng) for _ in range(count)], dtype=np.int64)
    u = rng.integers(0, cdf[-1], size=count, dtype=np.int64)
    return np.searchsorted(np.array(cdf, dtype=np.int64), u, side="right")


def _span_indices(cols: np.ndarray) -> np.ndarray:
    """Basis indices of ``R x`` for every ``x`` in MSB-first order.

    ``cols`` has shape ``(m, k)`` holding each column of ``R`` as a packed
    basis index; the result has shape ``(m, 2**k)``.
    """
    m, k = cols.shape
    span = np.zeros((m, 1), dtype=np.int64)
    for b in range(k):
        span = np.concatenate([span, span ^ cols[:, k - 1 - b : k - b]], axis=1)
    return span


def _full_rank_spans(n: int, k: int, m: int, rng: np.random.Generator) -> np.ndarray:
    spans = np.empty((m, 2**k), dtype=np.int64)
    pending = np.arange(m)
    weights = _msb_weights(n)
    for _ in range(MAX_RANK_RETRIES):
        if pending.size == 0:
            return spans
        r = rng.integers(0, 2, size=(pending.size, n, k), dtype=np.uint8)
        span = _span_indices(np.einsum("mnk,n->mk", r.astype(np.int64), weights))
        # rank k  <=>  no nonzero x maps to 0
        ok = (span[:, 1:] != 0).all(axis=1)
        spans[pending[ok]] = span[ok]
        pending = pending[~ok]
    raise RuntimeError("rank rejection loop exceeded its retry cap")


def sample_stabilizer_states(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform stabilizer states as rows of a ``(count, 2**n)`` array.

    Vectorized over samples; each row follows the same recipe as
    :func:`sample_stabilizer_state` (exact ``k`` draw, fair bits, whole-matrix
    rejection for ``R``) but consumes the random stream in a different order.
    """
    if not 1 <= n <= MAX_SAMPLE_QUBITS:
        raise ValueError(f"n must be in [1, {MAX_SAMPLE_QUBITS}], got {n}")
    ks = _sample_support_exponents(n, count, rng)
    out = np.zeros((count, 2**n), dtype=complex)
    weights = _msb_weights(n)
    for k in range(n + 1):
        rows = np.flatnonzero(ks == k)
        m = rows.size
        if m == 0:
            continue
        bits = rng.integers(0, 2, size=(m, k * k + k + n), dtype=np.uint8).astype(np.int64)
        t_index = bits[:, k * k + k :] @ weights
        if k == 0:
            out[rows, t_index] = 1.0
            continue
        q = bits[:, : k * k].reshape(m, k, k)
        c = bits[:, k * k : k * k + k]
        idx = _full_rank_spans(n, k, m, rng) ^ t_index[:, None]
        x = _x_table(k)
        quad = np.einsum("xi,mij,xj->mx", x, q, x) % 2
        dot = c @ x.T
        out[rows[:, None], idx] = _I_POWERS[(2 * quad + dot) % 4] * 2.0 ** (-k / 2)
    return out


# -- identity up to global phase -----------------------------------------------


def canonicalize_phase(psi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Remove the global phase so the first nonzero amplitude is positive real."""
    psi = np.asarray(psi, dtype=complex)
    nz = np.flatnonzero(np.abs(psi) > tol)
    if nz.size == 0:
        raise ValueError("zero vector has no phase")
    a = psi[nz[0]]
    return psi * (abs(a) / a)


def stabilizer_keys(states: np.ndarray) -> list[bytes]:
    """Hashable fingerprints of stabilizer states, equal iff states agree up to global phase.

    Relies on the stabilizer amplitude structure: after phase canonicalization
    and rescaling by ``2**(k/2)`` every entry is one of ``0, +-1, +-i``.
    Accepts a single vector or a stack of row vectors.
    """
    v = np.atleast_2d(np.asarray(states, dtype=complex))
    nz = np.abs(v) > 1e-12
    first = nz.argmax(axis=1)
    a = v[np.arange(v.shape[0]), first]
    v = v * (np.abs(a) / a)[:, None] * np.sqrt(nz.sum(axis=1))[:, None]
    digits = np.rint(v.real).astype(np.int8) + 3 * np.rint(v.imag).astype(np.int8)
    return [row.tobytes() for row in digits]


def stabilizer_key(psi: np.ndarray) -> bytes:
    """Fingerprint of a single stabilizer state; see :func:`stabilizer_keys`."""
    return stabilizer_keys(psi)[0]


def states_equal(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    """True if two state vectors coincide up to global phase."""
    return bool(np.allclose(canonicalize_phase(a), canonicalize_phase(b), rtol=0, atol=tol))


# -- exhaustive enumeration (test oracle) ---------------------------------------


def _all_bit_matrices(rows: int, cols: int) -> np.ndarray:
    m = _x_table(rows * cols)
    return m.reshape(-1, rows, cols)


def _phase_table(k: int, parity_exponent: bool) -> np.ndarray:
    """Phase exponents mod 4 for every ``(Q, c)`` pair and every ``x``: shape ``(2**(k*k) * 2**k, 2**k)``."""
    x = _x_table(k)
    qs = _all_bit_matrices(k, k)
    quad = np.einsum("xi,qij,xj->qx", x, qs, x) % 2
    cs = _x_table(k)
    dot = cs @ x.T
    if parity_exponent:
        dot = dot % 2
    e = (2 * quad[:, None, :] + dot[None, :, :]) % 4
    return e.reshape(-1, 2**k)


def _enumerate_codes(n: int, parity_exponent: bool = False):
    """Distinct state codes over all ``(k, Q, c, R, t)``.

    Each state is encoded in base 5: digit 0 for a zero amplitude and
    ``1 + e`` for amplitude ``i**e`` after fixing the first nonzero amplitude
    to phase 1. Returns the unique codes and one parameter tuple per code.
    """
    weights = 5 ** np.arange(2**n, dtype=np.int64)
    codes, witnesses = [], []
    t_all = _x_table(n)
    for k in range(n + 1):
        if k == 0:
            for t in t_all:
                codes.append(np.array([weights[bits_to_index(t)]]))
                witnesses.append([(0, None, None, None, t)])
            continue
        table = _phase_table(k, parity_exponent)
        n_c = 2**k
        x = _x_table(k)
        rs = [r for r in _all_bit_matrices(n, k) if rank_gf2(r) == k]
        block, wit = [], []
        for r in rs:
            base = ((x @ r.T) % 2) @ _msb_weights(n)
            for t in t_all:
                idx = base ^ bits_to_index(t)
                first = int(np.argmin(idx))
                e = (table - table[:, first : first + 1]) % 4
                block.append((e + 1) @ weights[idx])
                wit.append((r, t))
        block = np.concatenate(block)
        uniq, pos = np.unique(block, return_index=True)
        codes.append(uniq)
        per_rt = table.shape[0]
        ws = []
        for p in pos:
            r, t = wit[p // per_rt]
            qc = p % per_rt
            q_bits = _all_bit_matrices(k, k)[qc // n_c]
            c_bits = _x_table(k)[qc % n_c]
            ws.append((k, q_bits, c_bits, r, t))
        witnesses.append(ws)
    all_codes = np.concatenate(codes)
    all_witnesses = [w for ws in witnesses for w in ws]
    uniq, pos = np.unique(all_codes, return_index=True)
    return uniq, [all_witnesses[p] for p in pos]


def enumerate_all(n: int) -> list[np.ndarray]:
    """Every ``n``-qubit stabilizer state, phase-canonicalized and deduplicated.

    Iterates all parameter tuples ``(k, Q, c, R, t)``; feasible for ``n <= 3``.
    """
    if not 1 <= n <= MAX_ENUMERATE_QUBITS:
        raise ValueError(f"enumeration supports 1 <= n <= {MAX_ENUMERATE_QUBITS}, got {n}")
    _, witnesses = _enumerate_codes(n)
    states = []
    for k, q, c, r, t in witnesses:
        if k == 0:
            q = np.zeros((0, 0), dtype=np.uint8)
            c = np.zeros(0, dtype=np.uint8)
            r = np.zeros((n, 0), dtype=np.uint8)
        states.append(canonicalize_phase(build_state(StabilizerParams(n, k, q, c, r, t))))
    return states
