"""Simulated photonic measurements: true states, Poisson photon counts and
the Hermite-Gaussian mode model with its Gouy phase."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .shadow import MeasurementRecord, records_from_arrays

PROB_TOL = 1e-10
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one simulated run.

    ``exposure`` is the mean photon number collected for a projector with
    unit overlap; ``None`` means infinite exposure (exact Born frequencies).
    """

    qubits: int
    projections: int
    exposure: Optional[float] = 3e5
    seed: int = 0
    gouy_phase: float = 0.0

    def __post_init__(self):
        if self.qubits < 1:
            raise ValueError(f"qubits must be >= 1, got {self.qubits}")
        if self.projections < 1:
            raise ValueError(f"projections must be >= 1, got {self.projections}")
        if self.exposure is not None and not self.exposure > 0:
            raise ValueError(f"exposure must be > 0, got {self.exposure}")

    @property
    def dim(self) -> int:
        return 2**self.qubits


@dataclass(frozen=True)
class HGModeBasis:
    """First ``dim`` Hermite-Gaussian modes ``(n_x, m_y)``, ordered by order then ``n_x``."""

    dim: int
    modes: tuple = field(init=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        kmax = hg_kmax(self.dim)
        modes = [(nx, k - nx) for k in range(kmax + 1) for nx in range(k + 1)]
        object.__setattr__(self, "modes", tuple(modes[: self.dim]))

    @property
    def orders(self) -> np.ndarray:
        return np.array([nx + my for nx, my in self.modes])


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; return the matrix as complex."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=1e-12):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def pure_density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def haar_random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state: a normalized vector of i.i.d. standard complex Gaussians."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    g = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return g / np.linalg.norm(g)


def haar_random_states(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random states as rows."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    g = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def haar_overlap_pdf(x, dim: int):
    """Density of ``|<psi|phi>|**2`` for fixed ``psi`` and Haar ``phi``: ``(D-1)(1-x)**(D-2)``."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    x = np.asarray(x, dtype=float)
    if ((x < 0) | (x > 1)).any():
        raise ValueError("x must lie in [0, 1]")
    out = (dim - 1) * (1 - x) ** (dim - 2)
    return float(out) if out.ndim == 0 else out


def haar_overlap_cdf(x, dim: int):
    """Cumulative distribution matching :func:`haar_overlap_pdf`."""
    x = np.asarray(x, dtype=float)
    return 1 - (1 - x) ** (dim - 1)


def born_probabilities(rho: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """``<psi_i|rho|psi_i>`` for each row, clamped to ``[0, 1]`` after a tolerance check."""
    rho = np.asarray(rho)
    psi = np.atleast_2d(psi)
    if psi.shape[1] != rho.shape[0]:
        raise ValueError(f"dimension mismatch: states of length {psi.shape[1]} vs matrix {rho.shape}")
    p = np.einsum("ma,ab,mb->m", psi.conj(), rho, psi).real
    if p.min() < -PROB_TOL or p.max() > 1 + PROB_TOL:
        raise ValueError("Born probability outside [0, 1]; the state is not a valid density matrix")
    return np.clip(p, 0.0, 1.0)


def born_probability(rho: np.ndarray, psi: np.ndarray) -> float:
    return float(born_probabilities(rho, psi)[0])


def simulate_count_array(rho: np.ndarray, psi: np.ndarray, exposure: Optional[float], rng: np.random.Generator) -> np.ndarray:
    """Photon counts for projector rows ``psi``; exact probabilities when ``exposure`` is None."""
    p = born_probabilities(rho, psi)
    if exposure is None:
        return p
    if not exposure > 0:
        raise ValueError(f"exposure must be > 0, got {exposure}")
    return rng.poisson(exposure * p)


def simulate_counts(
    state: np.ndarray, projectors: Sequence[np.ndarray], exposure: float, rng: np.random.Generator
) -> list[MeasurementRecord]:
    """Independent Poisson counts with mean ``exposure * <psi|rho|psi>``, in projector order."""
    psi = np.stack([np.asarray(p, dtype=complex) for p in projectors])
    return records_from_arrays(psi, simulate_count_array(state, psi, exposure, rng))


def uniform_overlap_projector(
    psi: np.ndarray, rng: np.random.Generator, a: Optional[float] = None
) -> tuple[np.ndarray, float]:
    """Random ``phi`` whose squared overlap with ``psi`` equals a uniform draw ``a``.

    ``phi = sqrt(a) psi + sqrt(1 - a) g_perp / |g_perp|`` with ``g_perp`` the part
    of a complex Gaussian vector orthogonal to ``psi``. Passing ``a`` fixes the
    overlap instead of drawing it.
    """
    psi = np.asarray(psi, dtype=complex)
    if a is None:
        a = float(rng.uniform())
    elif not 0 <= a <= 1:
        raise ValueError(f"a must be in [0, 1], got {a}")
    while True:
        g = rng.standard_normal(psi.shape) + 1j * rng.standard_normal(psi.shape)
        perp = g - psi * np.vdot(psi, g)
        perp -= psi * np.vdot(psi, perp)
        norm = np.linalg.norm(perp)
        if norm >= DEGENERATE_TOL:
            break
    return math.sqrt(a) * psi + math.sqrt(1 - a) * perp / norm, a


def hg_kmax(dim: int) -> int:
    """Smallest mode order ``k`` with ``(k + 1)(k + 2) / 2 >= dim``."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    k = 0
    while (k + 1) * (k + 2) // 2 < dim:
        k += 1
    return k


def gouy_unitary(basis: HGModeBasis, phi: float) -> np.ndarray:
    """Diagonal of the Gouy-phase unitary, ``exp(i (k_j + 1) phi)`` per mode."""
    return np.exp(1j * (basis.orders + 1) * phi)


def apply_gouy(psi: np.ndarray, phi: float) -> np.ndarray:
    """Propagate ``psi`` through a Gouy phase ``phi`` in the HG basis of matching size."""
    psi = np.asarray(psi, dtype=complex)
    return gouy_unitary(HGModeBasis(psi.shape[-1]), phi) * psi
