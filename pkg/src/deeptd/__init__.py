"""Learn all kernels of a deep non-overlapping CNN from Gaussian data.

The estimator tensorizes the centered input-label moment vector and takes
its best rank-1 approximation; the factors recover the unit kernels up to
sign.  A greedy correlation search then fixes the signs and a least-squares
slope the overall scale.  :mod:`deeptd.harness` wraps the whole pipeline in
reproducible synthetic experiments.
"""

from .cnn import (
    IDENTITY,
    RELU,
    SOFTPLUS,
    Activation,
    CnnNetwork,
    ForwardTrace,
    diffuseness,
    estimate_cnn_gain,
    forward,
    forward_batch,
    gain_condition_holds,
    kernel_matrix,
    leaky_relu,
    non_overlapping_convolve,
    parse_activation,
    path_gain_vector,
)
from .decomposition import (
    AlsOptions,
    DecompositionResult,
    approx_spectral_norm,
    deeptd_estimate,
    empirical_tensor,
    orient_factors,
    rank1_decompose,
    rank1_residual,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    TrainingSet,
    TrialResult,
    correlation_metric,
    generate_operational_network,
    run_experiment,
    run_trial,
    sample_dataset,
    sample_kernels,
    test_mse,
    trial_seed,
)
from .ssa import (
    SignedEstimate,
    apply_signs,
    corr,
    greedy_sign_resolve,
    oracle_sign_resolve,
    predict,
    scaled_estimate,
)
from .tensors import (
    DenseTensor,
    TensorShape,
    contract_all_but,
    frobenius_norm,
    inner_product,
    outer_product,
    tensorize,
    vectorize,
)

__version__ = "0.1.0"
