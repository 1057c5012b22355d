"""Non-parametric inference and sampling for Archimax copulas.

The copula is characterized by a stable tail dependence function (an
expectation over a simplex-valued spectral variable) and an Archimedean
generator (the Williamson transform of a positive radial variable). Both
components are learned from data with small generative models and turned
back into samples through the radial-times-simplex representation.
"""

__version__ = "0.1.0"

from .core import (
    BlockSelection,
    DataMatrix,
    KendallSample,
    PseudoObservations,
    SimplexPoint,
    block_maxima,
    empirical_copula,
    empirical_kendall,
    equispace_kendall,
    ev_dependence_stat,
    kendall_tau,
    rank_normalize,
    read_csv,
    select_block_size,
    write_csv,
)
from .errors import (
    ArchimaxError,
    ConfigError,
    InvalidInputError,
    NumericError,
    SamplerDegenerateError,
    TrainingDivergenceError,
)
from .metrics import LambdaCurve, cvm, irae, lambda_map, lambda_mse, lambda_variance
from .nn import AdamState, GenerativeNet, TrainConfig, adam_step, gradient_check
from .parametric import (
    ArchGeneratorFamily,
    NsdStdf,
    TaylorJet,
    nsd_spectral_sample,
    nsd_stdf,
    phi,
    phi_inverse,
    phi_prime,
    phi_taylor,
    radial_cdf,
    sample_radial,
    tau_of_theta,
    theta_from_tau,
)
from .pipeline import FitConfig, FitResult, fit, init_ev, init_parametric
from .radial_infer import (
    FiniteRadial,
    RadialModel,
    choose_supports,
    kendall_mse,
    phi_inverse_numeric,
    reconstruct_finite,
    train_generator,
    williamson,
    williamson_deriv,
)
from .sampler import (
    ArchimaxModel,
    ParametricRadial,
    SynthResult,
    UniformSimplexSpectral,
    correct_simplex_marginals,
    sample_archimax,
    sample_gpc,
    sample_simplex,
    sample_simplex_batch,
    spectral_from_nsd,
    synth_dataset,
)
from .stdf_infer import (
    SpectralModel,
    cfg_estimate,
    cfg_modified_estimate,
    moment_penalty,
    pickands_estimate,
    stdf_eval,
    train_stdf,
    xi_loglik,
    xi_transform,
)
