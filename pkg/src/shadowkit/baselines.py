"""Positivity-enforcing baselines and fidelity estimation.

These estimators always return valid density matrices and are therefore
biased at small measurement counts, unlike the raw classical shadow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .shadow import ClassicalShadow, MeasurementRecord, records_to_arrays
from .sim import HGModeBasis, gouy_unitary

GOUY_GRID_POINTS = 2048
GOUY_PHASE_TOL = 1e-6
_INV_PHI = (math.sqrt(5) - 1) / 2


def simplex_project(values) -> np.ndarray:
    """Euclidean projection onto the probability simplex ``{x >= 0, sum x = 1}``."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty 1-D list of values")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = j[u - (css - 1) / j > 0][-1]
    tau = (css[rho - 1] - 1) / rho
    return np.maximum(v - tau, 0.0)


def _project_hermitian(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    lam = simplex_project(w)
    return (v * lam) @ v.conj().T


def project_shadow_psd(shadow) -> np.ndarray:
    """Nearest density matrix with the same eigenvectors: eigenvalues go onto the simplex."""
    h = np.asarray(getattr(shadow, "matrix", shadow), dtype=complex)
    h = (h + h.conj().T) / 2
    return _project_hermitian(h)


# -- maximum likelihood ----------------------------------------------------------


@dataclass(frozen=True)
class MLEConfig:
    """Hyperparameters of the accelerated projected-gradient MLE.

    ``initial_step=None`` means ``1 / (total_counts * D)``.
    """

    max_iterations: int = 5000
    likelihood_tolerance: float = 1e-10
    initial_step: Optional[float] = None
    backtracking_factor: float = 0.5
    probability_floor: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.likelihood_tolerance > 0:
            raise ValueError("likelihood_tolerance must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.backtracking_factor < 1:
            raise ValueError("backtracking_factor must lie in (0, 1)")


@dataclass
class MLEResult:
    rho: np.ndarray
    iterations: int
    converged: bool
    likelihoods: list = field(default_factory=list)


def mle_estimate(records: Sequence[MeasurementRecord], n: int, config: MLEConfig = MLEConfig()) -> np.ndarray:
    """Density matrix maximizing ``sum_i count_i ln <psi_i|rho|psi_i>``."""
    psi, counts = records_to_arrays(records)
    return mle_estimate_arrays(psi, counts, n, config).rho


def mle_estimate_arrays(psi: np.ndarray, counts: np.ndarray, n: int, config: MLEConfig = MLEConfig()) -> MLEResult:
    """Accelerated projected-gradient ascent on the log-likelihood.

    Nesterov momentum with the extrapolated point projected back onto the
    density matrices, backtracking on the step size, and a function-value
    restart whenever an iterate would lower the likelihood. The recorded
    likelihoods of accepted iterates are therefore nondecreasing.
    """
    d = 2**n
    if psi.ndim != 2 or psi.shape[1] != d:
        raise ValueError(f"projectors must have dimension {d}, got shape {psi.shape}")
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("all counts are zero; likelihood undefined")
    floor = config.probability_floor
    psi_c = psi.conj()

    def loglik(rho):
        p = np.einsum("ma,ab,mb->m", psi_c, rho, psi).real
        return float(counts @ np.log(np.maximum(p, floor))), p

    def gradient(p):
        return (psi.T * (counts / np.maximum(p, floor))) @ psi_c

    step = config.initial_step if config.initial_step is not None else 1.0 / (total * d)
    beta = config.backtracking_factor
    rho = np.eye(d, dtype=complex) / d
    l_rho, p_rho = loglik(rho)
    y, l_y, p_y = rho, l_rho, p_rho
    theta = 1.0
    history = [l_rho]
    restarted = True
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        g = gradient(p_y)
        while True:
            z = _project_hermitian(y + step * g)
            dz = z - y
            l_z, p_z = loglik(z)
            bound = l_y + np.vdot(g, dz).real - np.vdot(dz, dz).real / (2 * step)
            if l_z >= bound - 1e-12 * abs(l_y) or step < 1e-300:
                break
            step *= beta
        if l_z < l_rho:
            if restarted:
                converged = True
                break
            y, l_y, p_y = rho, l_rho, p_rho
            theta = 1.0
            restarted = True
            continue
        theta_next = (1 + math.sqrt(1 + 4 * theta * theta)) / 2
        y = _project_hermitian(z + ((theta - 1) / theta_next) * (z - rho))
        l_y, p_y = loglik(y)
        rel = (l_z - l_rho) / max(abs(l_rho), 1e-300)
        rho, l_rho, p_rho = z, l_z, p_z
        theta = theta_next
        restarted = False
        history.append(l_rho)
        # allow the step to recover after backtracking
        step /= math.sqrt(beta)
        if rel < config.likelihood_tolerance:
            converged = True
            break
    return MLEResult(rho, it, converged, history)


# -- fidelity -------------------------------------------------------------------


@dataclass
class FidelityResult:
    fidelity: float
    phase: float
    curve_phi: np.ndarray = field(repr=False, default=None)
    curve_fidelity: np.ndarray = field(repr=False, default=None)


def _matrix_and_clamp(state) -> tuple[np.ndarray, bool]:
    if isinstance(state, ClassicalShadow):
        return state.matrix, False
    return np.asarray(state), True


def fidelity(state, target: np.ndarray) -> float:
    """``<target|rho|target>``; unclamped, so shadows may give values outside ``[0, 1]``."""
    rho, _ = _matrix_and_clamp(state)
    target = np.asarray(target, dtype=complex)
    if rho.shape != (target.size, target.size):
        raise ValueError(f"dimension mismatch: matrix {rho.shape} vs target of length {target.size}")
    return float(np.vdot(target, rho @ target).real)


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2


def gouy_fidelity_curve(state, prepared: np.ndarray, phis: np.ndarray, basis: Optional[HGModeBasis] = None) -> np.ndarray:
    """``<prep|U(phi)^dag rho U(phi)|prep>`` on a grid of Gouy phases."""
    rho, _ = _matrix_and_clamp(state)
    prepared = np.asarray(prepared, dtype=complex)
    basis = basis or HGModeBasis(prepared.size)
    if rho.shape != (basis.dim, basis.dim) or prepared.size != basis.dim:
        raise ValueError("dimension mismatch between estimate, prepared state and mode basis")
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    w = np.exp(1j * np.outer(phis, basis.orders + 1)) * prepared
    return np.einsum("ma,ab,mb->m", w.conj(), rho, w).real


def compensated_fidelity(state, prepared: np.ndarray, basis: Optional[HGModeBasis] = None) -> FidelityResult:
    """Preparation fidelity maximized over the Gouy phase in ``[0, 2 pi)``.

    A dense grid locates the global maximum among the ripple of local ones,
    then golden-section search refines it to ``1e-6`` rad.
    """
    _, clamp = _matrix_and_clamp(state)
    prepared = np.asarray(prepared, dtype=complex)
    basis = basis or HGModeBasis(prepared.size)
    h = 2 * math.pi / GOUY_GRID_POINTS
    grid = np.arange(GOUY_GRID_POINTS) * h
    curve = gouy_fidelity_curve(state, prepared, grid, basis)
    best = grid[int(np.argmax(curve))]

    def objective(phi):
        return float(gouy_fidelity_curve(state, prepared, [phi], basis)[0])

    phi = _golden_max(objective, best - h, best + h, GOUY_PHASE_TOL)
    value = objective(phi)
    if value < curve.max():
        phi, value = best, float(curve.max())
    if clamp:
        value = min(max(value, 0.0), 1.0)
    return FidelityResult(value, phi % (2 * math.pi), grid, curve)


def compensated_state(prepared: np.ndarray, phase: float, basis: Optional[HGModeBasis] = None) -> np.ndarray:
    """``U(phase) |prepared>``: the prepared state corrected for the Gouy phase."""
    prepared = np.asarray(prepared, dtype=complex)
    basis = basis or HGModeBasis(prepared.size)
    return gouy_unitary(basis, phase) * prepared
