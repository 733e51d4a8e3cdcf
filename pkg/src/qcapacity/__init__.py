"""One-shot quantum capacity estimation and verification from prepare-and-measure data."""
from .bounds import (
    BoundParams,
    BoundResult,
    asymptotic_rate,
    bound_at_eta,
    general_estimation_bound,
    general_verification_bound,
    kappa,
    log2_kappa,
    mu_estimation,
    mu_verification,
    optimize_bound,
)
from .channels import (
    GilbertElliottChannel,
    IidFlipChannel,
    Preparation,
    PreparedQubit,
    apply,
    fully_depolarizing,
    gilbert_elliott,
    identity,
    iid_dephasing,
    iid_depolarizing,
    parse_channel,
    transmon_like,
)
from .mathcore import QubitBasis, binary_entropy, log_ratio_term, preparation_quality
from .protocol import (
    ErrorRates,
    Transcript,
    run_estimation,
    run_general_estimation,
    run_verification,
    sample_basis_string,
)
from .serfling import hypergeometric_tail_oracle, serfling_tail

__version__ = "0.1.0"
