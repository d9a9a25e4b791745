"""Acceptance criteria 1-15, each printing one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from shadowkit.analysis import run_bias_study, run_correlation_study, run_fidelity_vs_p, run_median_sweep
from shadowkit.baselines import compensated_fidelity, project_shadow_psd, simplex_project
from shadowkit.cli import main
from shadowkit.shadow import (
    batch_count,
    build_shadow,
    estimate_expectation,
    median_of_means_estimate,
    projector,
    records_from_arrays,
)
from shadowkit.sim import (
    ExperimentConfig,
    HGModeBasis,
    born_probabilities,
    gouy_unitary,
    haar_overlap_cdf,
    haar_random_state,
    haar_random_states,
    pure_density_matrix,
    uniform_overlap_projector,
)
from shadowkit.stabilizer import (
    enumerate_all,
    sample_stabilizer_params,
    build_state,
    sample_stabilizer_states,
    stabilizer_key,
    stabilizer_keys,
    stratum_cardinality,
    total_cardinality,
)


class Check:
    def __init__(self, number, title, time_limit):
        self.number, self.title, self.time_limit = number, title, time_limit
        self.failures = []
        self.details = []

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def expect(self, ok, message):
        (self.details if ok else self.failures).append(message)

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is None:
            self.expect(elapsed < self.time_limit, f"runtime {elapsed:.1f}s (limit {self.time_limit}s)")
        else:
            self.failures.append(f"{exc_type.__name__}: {exc}")
        status = "PASS" if not self.failures else "FAIL"
        shown = self.failures or self.details
        line = f"criterion {self.number}: {status} {self.title} [{'; '.join(shown)}]"
        print(line)
        ACCEPTANCE_LINES.append(line)
        if exc_type is None:
            assert not self.failures, line
        return False


def random_density_matrix(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_criterion_01_cardinality():
    with Check(1, "cardinality exactness", 1) as c:
        for n in range(1, 11):
            closed = 2**n * math.prod(2**k + 1 for k in range(1, n + 1))
            if total_cardinality(n) != closed:
                c.expect(False, f"C({n}) = {total_cardinality(n)}, expected {closed}")
            if sum(stratum_cardinality(n, k) for k in range(n + 1)) != closed:
                c.expect(False, f"strata of n={n} do not sum to C({n})")
        c.expect(True, f"n = 1..10 exact, C(10) = {total_cardinality(10)}")


def test_criterion_02_enumeration():
    with Check(2, "enumeration", 30) as c:
        sizes = [len({stabilizer_key(s) for s in enumerate_all(n)}) for n in (1, 2, 3)]
        c.expect(sizes == [6, 60, 1080], f"distinct states {sizes}")


def test_criterion_03_uniformity():
    with Check(3, "uniformity of n=2 sampling", 30) as c:
        index = {stabilizer_key(s): i for i, s in enumerate(enumerate_all(2))}
        states = sample_stabilizer_states(2, 600_000, np.random.default_rng(3))
        freq = np.bincount([index[k] for k in stabilizer_keys(states)], minlength=60)
        p = stats.chisquare(freq).pvalue
        c.expect(p > 0.01, f"chi-square p = {p:.3f} over 60 states")


def _affine_closed(support):
    s = np.asarray(support)
    base = s[0]
    shifted = set((s ^ base).tolist())
    pairs = np.bitwise_xor.outer(s ^ base, s ^ base).ravel()
    return set(pairs.tolist()) <= shifted


def test_criterion_04_structure():
    with Check(4, "stabilizer structure", 60) as c:
        rng = np.random.default_rng(4)
        phases = np.array([1, 1j, -1, -1j])
        bad = 0
        for n in range(1, 6):
            for _ in range(10_000):
                params = sample_stabilizer_params(n, rng)
                psi = build_state(params)
                nz = np.flatnonzero(np.abs(psi) > 1e-12)
                scaled = psi[nz] * 2 ** (params.k / 2)
                ok = (
                    nz.size == 2**params.k
                    and np.allclose(np.abs(psi[nz]), 2 ** (-params.k / 2), rtol=0, atol=1e-14)
                    and np.min(np.abs(scaled[:, None] - phases), axis=1).max() < 1e-12
                    and _affine_closed(nz)
                )
                bad += not ok
        c.expect(bad == 0, f"{bad} violations in 5 x 10^4 states")


def test_criterion_05_exact_inversion():
    with Check(5, "exact shadow inversion", 10) as c:
        rng = np.random.default_rng(5)
        worst = 0.0
        for n in (1, 2):
            psi = np.array(enumerate_all(n))
            for i in range(20):
                d = 2**n
                rho = pure_density_matrix(haar_random_state(d, rng)) if i % 2 else random_density_matrix(d, rng)
                sh = build_shadow(records_from_arrays(psi, born_probabilities(rho, psi)), n)
                worst = max(worst, np.abs(sh.matrix - rho).max())
        c.expect(worst < 1e-10, f"max deviation {worst:.2e}")


def test_criterion_06_median_identity():
    with Check(6, "median-of-means identity", 1) as c:
        rng = np.random.default_rng(6)
        psi = sample_stabilizer_states(3, 1000, rng)
        records = records_from_arrays(psi, rng.poisson(1000, size=1000))
        identical = all(
            median_of_means_estimate(records, 3, o, 1) == estimate_expectation(build_shadow(records, 3), o)
            for o in (projector(haar_random_state(8, rng)) for _ in range(20))
        )
        c.expect(identical, "K=1 bit-identical to the mean on 20 observables")
        c.expect(batch_count(5000, 0.01) == 28, f"batch_count(5000, 0.01) = {batch_count(5000, 0.01)}")


def test_criterion_07_median_flatness():
    with Check(7, "flatness of r(K)", 120) as c:
        sweep = run_median_sweep(ExperimentConfig(3, 10_000, 3e5, seed=7), range(1, 51), 5000)
        r1 = sweep[0][1]
        dev = max(abs(r - r1) for _, r in sweep)
        c.expect(dev < 0.02, f"r(1) = {r1:.4f}, max |r(K) - r(1)| = {dev:.4f}")


def test_criterion_08_correlation_floor():
    with Check(8, "correlation floor", 60) as c:
        rep = run_correlation_study(ExperimentConfig(3, 10_000, 3e5, seed=8), 5000)
        c.expect(rep.pearson_r >= 0.97, f"r = {rep.pearson_r:.4f}")


def test_criterion_09_bias():
    # A single D=8, P=100 run gives shadow fidelities with spread ~0.2, so beta
    # is pooled over many fresh true states to make the unbiasedness check sharp.
    with Check(9, "bias reproduction", 180) as c:
        shadow8, mle8 = run_bias_study(ExperimentConfig(3, 100, 3e5, seed=9), 500, repetitions=200)
        c.expect(0.95 <= shadow8.beta <= 1.05, f"beta_shadow(D=8) = {shadow8.beta:.3f}")
        c.expect(mle8.beta < 0.9, f"beta_MLE(D=8) = {mle8.beta:.3f}")
        _, mle32 = run_bias_study(ExperimentConfig(5, 300, 3e5, seed=9), 500, repetitions=20)
        c.expect(mle32.beta < mle8.beta, f"beta_MLE(D=32) = {mle32.beta:.3f}")


def test_criterion_10_fidelity_curve_bias():
    with Check(10, "fidelity-curve bias", 240) as c:
        grid = [20, 50, 100, 300, 1000]
        worst = 0.0
        for n in (1, 2, 3):
            curve = run_fidelity_vs_p(ExperimentConfig(n, grid[-1], 3e5, seed=10), grid, "shadow", repetitions=50)
            diff = curve.samples - curve.truth
            z = np.abs(diff.mean(axis=0)) / (diff.std(axis=0, ddof=1) / math.sqrt(diff.shape[0]))
            worst = max(worst, z.max())
        c.expect(worst < 3, f"shadow max |mean - truth| = {worst:.2f} stderr over n=1..3")
        for tag in ("shadow_projected", "mle"):
            curve = run_fidelity_vs_p(ExperimentConfig(5, 10_000, 3e5, seed=10), [250, 10_000], tag, repetitions=5)
            drop = curve.fidelity_mean[1] - curve.fidelity_mean[0]
            c.expect(
                drop >= 0.3,
                f"{tag} F(250) = {curve.fidelity_mean[0]:.3f}, F(10^4) = {curve.fidelity_mean[1]:.3f}",
            )


def test_criterion_11_haar_overlap():
    with Check(11, "Haar overlap law", 30) as c:
        rng = np.random.default_rng(11)
        for d in (2, 8):
            x = np.abs(haar_random_states(d, 100_000, rng) @ haar_random_state(d, rng).conj()) ** 2
            p = stats.kstest(x, lambda v: haar_overlap_cdf(v, d)).pvalue
            c.expect(p > 0.01, f"D={d} KS p = {p:.3f}")


def test_criterion_12_uniform_overlap():
    with Check(12, "uniform-overlap projectors", 10) as c:
        rng = np.random.default_rng(12)
        psi = haar_random_state(8, rng)
        err, a_values = 0.0, []
        for _ in range(10_000):
            phi, a = uniform_overlap_projector(psi, rng)
            err = max(err, abs(abs(np.vdot(psi, phi)) ** 2 - a))
            a_values.append(a)
        c.expect(err < 1e-12, f"max overlap error {err:.1e}")
        p = stats.kstest(a_values, "uniform").pvalue
        c.expect(p > 0.01, f"KS p = {p:.3f}")


def _simplex_oracle(v):
    best, best_dist = None, math.inf
    for mask in range(1, 2**v.size):
        s = [i for i in range(v.size) if mask >> i & 1]
        x = np.zeros_like(v)
        x[s] = v[s] - (v[s].sum() - 1) / len(s)
        if (x[s] >= 0).all() and np.sum((x - v) ** 2) < best_dist:
            best, best_dist = x, np.sum((x - v) ** 2)
    return best


def test_criterion_13_simplex():
    with Check(13, "simplex projection oracle", 5) as c:
        rng = np.random.default_rng(13)
        err = idem = 0.0
        for _ in range(1000):
            v = rng.normal(scale=2, size=rng.integers(1, 5))
            x = simplex_project(v)
            err = max(err, np.abs(x - _simplex_oracle(v)).max())
            idem = max(idem, np.abs(simplex_project(x) - x).max())
        c.expect(err < 1e-10, f"max oracle deviation {err:.1e}")
        c.expect(idem < 1e-10, f"idempotence deviation {idem:.1e}")


def test_criterion_14_gouy_recovery():
    with Check(14, "Gouy phase recovery", 5) as c:
        basis = HGModeBasis(32)
        prep = haar_random_state(32, np.random.default_rng(14))
        rho = pure_density_matrix(gouy_unitary(basis, 1.0) * prep)
        res = compensated_fidelity(rho, prep, basis)
        c.expect(abs(res.phase - 1.0) < 1e-4, f"phase error {abs(res.phase - 1.0):.1e}")
        c.expect(abs(res.fidelity - 1) < 1e-9, f"1 - F = {1 - res.fidelity:.1e}")


def test_criterion_15_determinism(tmp_path):
    runs = {
        "correlate": (["--qubits", "3", "--projections", "2000", "--observables", "500"], ["points.csv"]),
        "bias": (["--qubits", "3", "--projections", "100", "--observables", "200"], ["points_shadow.csv", "points_mle.csv"]),
        "fidelity-curve": (["--qubits", "2", "--grid", "20,100,500", "--estimator", "mle"], ["curve.csv"]),
        "median-sweep": (["--qubits", "2", "--projections", "500", "--observables", "200", "--k-grid", "1,5,10"], ["median_sweep.csv"]),
        "simulate": (["--qubits", "3", "--projections", "300", "--gouy-phase", "0.2"], ["records.csv"]),
    }
    with Check(15, "determinism of CLI reruns", 60) as c:
        for cmd, (flags, files) in runs.items():
            first, second = tmp_path / f"{cmd}-1", tmp_path / f"{cmd}-2"
            assert main([cmd, *flags, "--seed", "15", "--out", str(first)]) == 0
            assert main([cmd, "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
            same = all((first / f).read_bytes() == (second / f).read_bytes() for f in files)
            c.expect(same, f"{cmd} identical")
        c.expect(True, f"{len(runs)} pipelines")
