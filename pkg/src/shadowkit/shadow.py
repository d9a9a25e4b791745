"""Classical shadows from stabilizer projections and observable estimation.

A shadow is built from projector/count pairs as::

    rho_hat = (2**n + 1) * sum_i f_i |psi_i><psi_i| - I,   f_i = count_i / sum_j count_j

It is Hermitian with unit trace but in general not positive semidefinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .io import matrix_from_json, matrix_to_json

IMAG_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementRecord:
    """One measured projector ``|psi><psi|`` and the photons it collected.

    ``count`` is normally a nonnegative integer; nonnegative real weights are
    accepted so that exact Born probabilities can stand in for frequencies.
    """

    projector: np.ndarray
    count: float

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be nonnegative, got {self.count}")


@dataclass(frozen=True)
class ClassicalShadow:
    n: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return 2**self.n


def projector(phi: np.ndarray) -> np.ndarray:
    """Rank-1 observable ``|phi><phi|``."""
    phi = np.asarray(phi, dtype=complex)
    return np.outer(phi, phi.conj())


def records_to_arrays(records: Sequence[MeasurementRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Stack records into a ``(P, D)`` projector array and a length-``P`` count array."""
    if not records:
        raise ValueError("no measurement records")
    psi = np.stack([np.asarray(r.projector, dtype=complex) for r in records])
    counts = np.array([r.count for r in records])
    return psi, counts


def records_from_arrays(psi: np.ndarray, counts) -> list[MeasurementRecord]:
    return [MeasurementRecord(p, c) for p, c in zip(psi, np.asarray(counts).tolist())]


def _shadow_matrix(psi: np.ndarray, counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    if total <= 0:
        raise ValueError("all counts are zero; frequencies undefined")
    f = counts / total
    d = psi.shape[1]
    s = (psi.T * f) @ psi.conj()
    return (d + 1) * s - np.eye(d)


def build_shadow(records: Sequence[MeasurementRecord], n: int) -> ClassicalShadow:
    psi, counts = records_to_arrays(records)
    return build_shadow_arrays(psi, counts, n)


def build_shadow_arrays(psi: np.ndarray, counts: np.ndarray, n: int) -> ClassicalShadow:
    """Array form of :func:`build_shadow`; rows of ``psi`` are projector states."""
    if psi.ndim != 2 or psi.shape[1] != 2**n:
        raise ValueError(f"projectors must have dimension {2**n}, got shape {psi.shape}")
    return ClassicalShadow(n, _shadow_matrix(psi, np.asarray(counts)))


def _as_matrix(state) -> np.ndarray:
    return np.asarray(getattr(state, "matrix", state))


def _real_or_raise(value: complex) -> float:
    if abs(value.imag) > IMAG_TOL:
        raise ValueError(f"expectation has imaginary part {value.imag:.3g}; input is not Hermitian")
    return float(value.real)


def estimate_expectation(shadow, obs: np.ndarray) -> float:
    """``Tr(O rho_hat)``; may fall outside ``[0, 1]`` even for projectors."""
    rho = _as_matrix(shadow)
    obs = np.asarray(obs)
    if obs.shape != rho.shape:
        raise ValueError(f"dimension mismatch: observable {obs.shape} vs state {rho.shape}")
    return _real_or_raise(np.einsum("ij,ji->", obs, rho))


def estimate_projectors(shadow, phis: np.ndarray) -> np.ndarray:
    """``<phi|rho_hat|phi>`` for every row of ``phis`` (vectorized rank-1 observables)."""
    rho = _as_matrix(shadow)
    phis = np.atleast_2d(phis)
    if phis.shape[1] != rho.shape[0]:
        raise ValueError(f"dimension mismatch: states of length {phis.shape[1]} vs matrix {rho.shape}")
    vals = np.einsum("ma,ab,mb->m", phis.conj(), rho, phis)
    if np.abs(vals.imag).max() > IMAG_TOL:
        raise ValueError("expectations have imaginary parts; input is not Hermitian")
    return vals.real


def batch_count(m: int, delta: float) -> int:
    """Number of median-of-means batches, ``round(2 ln(2M / delta))``, at least 1."""
    if m < 1 or not 0 < delta < 1:
        raise ValueError(f"need M >= 1 and 0 < delta < 1, got M={m}, delta={delta}")
    return max(1, math.floor(2 * math.log(2 * m / delta) + 0.5))


def batch_slices(p: int, k: int) -> list[slice]:
    """``k`` contiguous slices of length ``p // k``; the remainder joins the last one."""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    if p < k:
        raise ValueError(f"cannot split {p} records into {k} batches")
    size = p // k
    return [slice(i * size, (i + 1) * size if i < k - 1 else p) for i in range(k)]


def batch_shadows(psi: np.ndarray, counts: np.ndarray, n: int, k: int) -> list[ClassicalShadow]:
    """One shadow per contiguous batch, each with its own normalized frequencies."""
    return [build_shadow_arrays(psi[s], counts[s], n) for s in batch_slices(len(psi), k)]


def median_of_means_estimate(records: Sequence[MeasurementRecord], n: int, obs: np.ndarray, k: int) -> float:
    """Median over ``k`` contiguous batches of the per-batch shadow estimate of ``Tr(O rho)``."""
    psi, counts = records_to_arrays(records)
    vals = [estimate_expectation(sh, obs) for sh in batch_shadows(psi, counts, n, k)]
    return float(np.median(vals))


def median_of_means_projectors(psi: np.ndarray, counts: np.ndarray, n: int, phis: np.ndarray, k: int) -> np.ndarray:
    """Vectorized median-of-means estimates for many rank-1 observables."""
    vals = np.stack([estimate_projectors(sh, phis) for sh in batch_shadows(psi, counts, n, k)])
    return np.median(vals, axis=0)


def shadow_to_json(shadow) -> dict:
    """``{n, matrix}`` with the matrix row-major as ``[re, im]`` pairs."""
    m = _as_matrix(shadow)
    return {"n": int(round(math.log2(m.shape[0]))), "matrix": matrix_to_json(m)}


def shadow_from_json(data: dict) -> ClassicalShadow:
    mat = matrix_from_json(data["matrix"])
    n = int(data["n"])
    if mat.shape != (2**n, 2**n):
        raise ValueError(f"matrix shape {mat.shape} does not match n={n}")
    return ClassicalShadow(n, mat)
