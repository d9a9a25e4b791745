"""Seeded simulation pipelines: correlation, bias, fidelity-vs-P and median sweeps.

Every pipeline is a deterministic function of its configuration. Each
repetition ``r`` draws from its own generators derived from
``SeedSequence(seed, spawn_key=(r,))``, split into independent streams for
the true state, the projectors, the photon counts, the observables and an
independent calibration record set.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .baselines import MLEConfig, compensated_fidelity, compensated_state, fidelity, mle_estimate_arrays, project_shadow_psd
from .shadow import ClassicalShadow, build_shadow_arrays, estimate_projectors, median_of_means_projectors
from .sim import (
    ExperimentConfig,
    apply_gouy,
    born_probabilities,
    haar_random_state,
    haar_random_states,
    pure_density_matrix,
    simulate_count_array,
)
from .stabilizer import enumerate_all, sample_stabilizer_states

ESTIMATORS = ("shadow", "shadow_projected", "mle")
OBSERVABLE_KINDS = ("haar", "uniform_overlap")


@dataclass
class CorrelationReport:
    pearson_r: float
    beta: float
    beta_stderr: float
    point_count: int
    points: np.ndarray = field(repr=False)  # columns: o_meas, o_est

    def to_json(self) -> dict:
        return {
            "pearson_r": self.pearson_r,
            "beta": self.beta,
            "beta_stderr": self.beta_stderr,
            "point_count": self.point_count,
        }


@dataclass
class FidelityCurve:
    dimension: int
    projection_counts: list
    fidelity_mean: list
    fidelity_stderr: list
    estimator_tag: str
    # per repetition x grid point
    samples: np.ndarray = field(repr=False, default=None)
    truth: np.ndarray = field(repr=False, default=None)


# -- statistics -------------------------------------------------------------------


def pearson_r(xs, ys) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length sequences with at least 2 points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance; correlation undefined")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def fit_beta_origin(xs, ys) -> tuple[float, float]:
    """Least squares ``y = beta x`` through the origin; returns ``(beta, stderr)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length sequences with at least 2 points")
    sxx = x @ x
    if sxx == 0:
        raise ValueError("all x are zero; slope undefined")
    beta = (x @ y) / sxx
    resid = y - beta * x
    stderr = math.sqrt((resid @ resid) / ((x.size - 1) * sxx))
    return float(beta), stderr


def correlation_report(o_meas, o_est) -> CorrelationReport:
    o_meas = np.asarray(o_meas, dtype=float)
    o_est = np.asarray(o_est, dtype=float)
    beta, stderr = fit_beta_origin(o_meas, o_est)
    return CorrelationReport(pearson_r(o_meas, o_est), beta, stderr, o_meas.size, np.column_stack([o_meas, o_est]))


# -- plumbing ------------------------------------------------------------------------


def worker_count() -> int:
    """Worker cap from ``SHADOWKIT_THREADS``; sequential when unset."""
    raw = os.environ.get("SHADOWKIT_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"SHADOWKIT_THREADS must be an integer, got {raw!r}") from None


def _map_indexed(fn: Callable[[int], object], count: int) -> list:
    workers = min(worker_count(), count)
    if workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, range(count)))


def repetition_streams(seed: int, rep: int) -> dict[str, np.random.Generator]:
    names = ("state", "projectors", "counts", "observables", "calibration")
    children = np.random.SeedSequence(seed, spawn_key=(rep,)).spawn(len(names))
    return {name: np.random.default_rng(ss) for name, ss in zip(names, children)}


@dataclass
class SimulatedRun:
    prepared: np.ndarray
    true_state: np.ndarray
    psi: np.ndarray  # projector states as rows
    counts: np.ndarray
    streams: dict = field(repr=False)

    @property
    def rho(self) -> np.ndarray:
        return pure_density_matrix(self.true_state)


def simulate_run(
    config: ExperimentConfig, rep: int = 0, projections: Optional[int] = None, enumerate_projectors: bool = False
) -> SimulatedRun:
    """Haar prepared state, Gouy-shifted true state, stabilizer projectors and their counts."""
    streams = repetition_streams(config.seed, rep)
    n = config.qubits
    prepared = haar_random_state(config.dim, streams["state"])
    true_state = apply_gouy(prepared, config.gouy_phase) if config.gouy_phase else prepared
    if enumerate_projectors:
        psi = np.array(enumerate_all(n))
    else:
        psi = sample_stabilizer_states(n, projections or config.projections, streams["projectors"])
    counts = simulate_count_array(pure_density_matrix(true_state), psi, config.exposure, streams["counts"])
    return SimulatedRun(prepared, true_state, psi, counts, streams)


def estimate_state(tag: str, psi: np.ndarray, counts: np.ndarray, n: int, mle_config: Optional[MLEConfig] = None):
    """State estimate from records: a raw shadow, its PSD projection, or the MLE."""
    if tag == "shadow":
        return build_shadow_arrays(psi, counts, n)
    if tag == "shadow_projected":
        return project_shadow_psd(build_shadow_arrays(psi, counts, n))
    if tag == "mle":
        return mle_estimate_arrays(psi, counts, n, mle_config or MLEConfig()).rho
    raise ValueError(f"unknown estimator {tag!r}; expected one of {ESTIMATORS}")


def uniform_overlap_projectors(psi: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows ``phi`` with ``|<psi|phi>|**2`` uniform on ``[0, 1]`` (vectorized form)."""
    psi = np.asarray(psi, dtype=complex)
    a = rng.uniform(size=count)
    g = rng.standard_normal((count, psi.size)) + 1j * rng.standard_normal((count, psi.size))
    perp = g - np.outer(g @ psi.conj(), psi)
    perp -= np.outer(perp @ psi.conj(), psi)
    norm = np.linalg.norm(perp, axis=1, keepdims=True)
    return np.sqrt(a)[:, None] * psi + np.sqrt(1 - a)[:, None] * perp / norm


def draw_observables(kind: str, true_state: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "haar":
        return haar_random_states(true_state.size, count, rng)
    if kind == "uniform_overlap":
        return uniform_overlap_projectors(true_state, count, rng)
    raise ValueError(f"unknown observable kind {kind!r}; expected one of {OBSERVABLE_KINDS}")


def direct_values(
    run: SimulatedRun, phis: np.ndarray, exposure: Optional[float], rng: np.random.Generator
) -> np.ndarray:
    """Directly measured ``<phi|rho|phi>``: exact Born values, or Poisson-noised when ``exposure`` is set."""
    p = born_probabilities(run.rho, phis)
    if exposure is None:
        return p
    return rng.poisson(exposure * p) / exposure


def _observable_points(run, config, m_observables, kind, direct_exposure):
    phis = draw_observables(kind, run.true_state, m_observables, run.streams["observables"])
    o_meas = direct_values(run, phis, direct_exposure, run.streams["observables"])
    return phis, o_meas


# -- pipelines -----------------------------------------------------------------------


def run_correlation_study(
    config: ExperimentConfig,
    m_observables: int,
    observable_kind: str = "haar",
    *,
    estimator: str = "shadow",
    repetitions: int = 1,
    direct_exposure: Optional[float] = None,
    enumerate_projectors: bool = False,
    mle_config: Optional[MLEConfig] = None,
) -> CorrelationReport:
    """Shadow predictions against direct values for random projectors.

    ``estimator="truth"`` substitutes the true density matrix, which must give
    a perfect correlation; it checks the pipeline itself. Points from all
    repetitions (fresh true states) are pooled into one report.
    """
    if estimator != "truth" and estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")

    def one(rep):
        run = simulate_run(config, rep, enumerate_projectors=enumerate_projectors)
        phis, o_meas = _observable_points(run, config, m_observables, observable_kind, direct_exposure)
        est = run.rho if estimator == "truth" else estimate_state(estimator, run.psi, run.counts, config.qubits, mle_config)
        return o_meas, estimate_projectors(est, phis)

    parts = _map_indexed(one, repetitions)
    return correlation_report(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def run_bias_study(
    config: ExperimentConfig,
    m_observables: int,
    *,
    repetitions: int = 1,
    mle_config: Optional[MLEConfig] = None,
) -> tuple[CorrelationReport, CorrelationReport]:
    """Shadow and MLE predictions from identical records, with uniform-overlap observables."""

    def one(rep):
        run = simulate_run(config, rep)
        phis, o_meas = _observable_points(run, config, m_observables, "uniform_overlap", None)
        shadow = build_shadow_arrays(run.psi, run.counts, config.qubits)
        mle = mle_estimate_arrays(run.psi, run.counts, config.qubits, mle_config or MLEConfig()).rho
        return o_meas, estimate_projectors(shadow, phis), estimate_projectors(mle, phis)

    parts = _map_indexed(one, repetitions)
    o_meas = np.concatenate([p[0] for p in parts])
    return (
        correlation_report(o_meas, np.concatenate([p[1] for p in parts])),
        correlation_report(o_meas, np.concatenate([p[2] for p in parts])),
    )


def run_fidelity_vs_p(
    config: ExperimentConfig,
    p_grid: Sequence[int],
    estimator: str = "shadow",
    repetitions: int = 5,
    *,
    mle_config: Optional[MLEConfig] = None,
    phase_source: str = "calibration",
) -> FidelityCurve:
    """Compensated preparation fidelity as a function of the number of projections.

    For each repetition the records for the largest ``P`` are simulated once
    and every smaller ``P`` uses their prefix. The compensating Gouy phase is
    fitted once, on an independent calibration set of the same size drawn
    from the same true state, and held fixed across the curve. Fitting it on
    the evaluated records instead (``phase_source="records"``, which uses the
    full record sequence) biases the large-``P`` points slightly upward.
    ``truth`` holds the exact overlap of the compensated prepared state with
    the true state.
    """
    grid = [int(p) for p in p_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise ValueError("p_grid must be a nonempty strictly ascending list of positive integers")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if phase_source not in ("calibration", "records"):
        raise ValueError(f"phase_source must be 'calibration' or 'records', got {phase_source!r}")
    n = config.qubits

    def one(rep):
        run = simulate_run(config, rep, projections=grid[-1])
        estimates = [estimate_state(estimator, run.psi[:p], run.counts[:p], n, mle_config) for p in grid]
        if phase_source == "records":
            reference = estimates[-1]
        else:
            cal = run.streams["calibration"]
            cal_psi = sample_stabilizer_states(n, grid[-1], cal)
            cal_counts = simulate_count_array(run.rho, cal_psi, config.exposure, cal)
            reference = estimate_state(estimator, cal_psi, cal_counts, n, mle_config)
        phase = compensated_fidelity(reference, run.prepared).phase
        target = compensated_state(run.prepared, phase)
        truth = abs(np.vdot(target, run.true_state)) ** 2
        return [fidelity(e, target) for e in estimates], truth

    parts = _map_indexed(one, repetitions)
    samples = np.array([p[0] for p in parts])
    truth = np.repeat(np.array([p[1] for p in parts])[:, None], len(grid), axis=1)
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(repetitions) if repetitions > 1 else np.zeros(len(grid))
    return FidelityCurve(config.dim, grid, mean.tolist(), stderr.tolist(), estimator, samples, truth)


def run_median_sweep(
    config: ExperimentConfig,
    k_grid: Sequence[int],
    m_observables: int,
    *,
    repetitions: int = 1,
) -> list[tuple[int, float]]:
    """Pearson ``r`` of median-of-means predictions for each batch count ``K``.

    Uses exactly the records and Haar observables of :func:`run_correlation_study`
    with the same configuration, so ``K = 1`` reproduces its ``r``.
    """
    ks = [int(k) for k in k_grid]
    if any(k < 1 for k in ks):
        raise ValueError("batch counts must be >= 1")

    def one(rep):
        run = simulate_run(config, rep)
        phis, o_meas = _observable_points(run, config, m_observables, "haar", None)
        return o_meas, [median_of_means_projectors(run.psi, run.counts, config.qubits, phis, k) for k in ks]

    parts = _map_indexed(one, repetitions)
    o_meas = np.concatenate([p[0] for p in parts])
    return [(k, pearson_r(o_meas, np.concatenate([p[1][j] for p in parts]))) for j, k in enumerate(ks)]
