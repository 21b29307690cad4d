"""Randomized instance encoding: exact privacy/utility scores, random
neural encoders, and an adversarial attack suite."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    ImpossibleObservationError,
    NumericDivergenceError,
    SupportViolationError,
)
from .families import (
    EncoderFamily,
    TableEncoder,
    compose_families,
    family_from_json,
    family_from_tables,
    family_to_json,
    grow_family,
    load_family,
    make_family,
    permutation_family,
    sample_encoder,
    save_family,
)
from .posterior import (
    MismatchedDistribution,
    Posterior,
    optimal_attack,
    pos_set,
    posterior,
    suboptimal_attack,
)
from .scoring import (
    LabelingPrior,
    MultiOwnerUtilityReport,
    ScoreReport,
    all_labelings_prior,
    decompose_privacy_score,
    entropy_bits,
    kl_gap,
    labeling_prior,
    mismatched_privacy_score,
    multi_owner_utility,
    privacy_score,
    utility_score,
)
from .universe import (
    Observation,
    OwnerDataset,
    PublicDataset,
    Universe,
    build_universe,
    check_disjoint,
    load_universe,
    make_observation,
    sample_owner_dataset,
    save_universe,
    universe_from_json,
    universe_to_json,
)
