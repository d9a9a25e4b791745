"""Classical-shadow property estimation with random stabilizer measurements."""

__version__ = "0.1.0"

from .baselines import (
    FidelityResult,
    MLEConfig,
    compensated_fidelity,
    fidelity,
    mle_estimate,
    project_shadow_psd,
    simplex_project,
)
from .gf2 import linear_form_gf2, matvec_gf2, quadratic_form_gf2, random_full_rank_matrix, rank_gf2
from .shadow import (
    ClassicalShadow,
    MeasurementRecord,
    batch_count,
    build_shadow,
    estimate_expectation,
    median_of_means_estimate,
    projector,
)
from .sim import (
    ExperimentConfig,
    HGModeBasis,
    born_probability,
    gouy_unitary,
    haar_overlap_pdf,
    haar_random_state,
    hg_kmax,
    simulate_counts,
    uniform_overlap_projector,
)
from .stabilizer import (
    StabilizerParams,
    build_state,
    enumerate_all,
    gaussian_binomial,
    sample_stabilizer_state,
    sample_stabilizer_states,
    sample_support_exponent,
    stratum_cardinality,
    total_cardinality,
)
