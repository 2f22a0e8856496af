"""Directed information and nonanticipative rate-distortion on finite alphabets."""

from .directed import (
    DirectedInfoReport,
    directed_information,
    mi_equals_di_check,
    mutual_information,
    optimal_r_kernel,
    variational_A,
    variational_B,
)
from .oracle import OracleReport, analytic_binary_rdf, classical_blahut, grid_lagrangian_min
from .prob import (
    Alphabet,
    CausalKernelFamily,
    DimensionError,
    FinitePmf,
    JointCausalDistribution,
    KernelKind,
    SequenceIndexer,
    ValidationError,
    causal_product,
    condition_joint,
    iid_source,
    kl_divergence,
    marginals,
    markov_source,
    memoryless_channel,
    pi_measure,
)
from .rdf import (
    BaaConfig,
    BaaTrace,
    DistortionSpec,
    Init,
    RDPoint,
    baa_run,
    baa_update,
    expected_distortion,
    fixed_point_residual,
    na_rdf_value,
    optimal_channel_for_marginals,
    rd_curve,
)

__version__ = "0.1.0"
