"""Accurate answers to adaptively chosen statistical queries via subsampling and noise."""

from .errors import BudgetExhaustedError, InvalidParameterError, SampleSizeWarning
from .noise import exp_mechanism_probabilities, exp_mechanism_select, sample_laplace
from .optimize import (
    GdConfig,
    LossSpec,
    gd_answer,
    gd_answer_boosted,
    gradient_oracle,
    noisy_gradient,
    quadratic_loss,
)
from .privacy import (
    BudgetLedger,
    PrivacyParams,
    amplify_with_replacement,
    amplify_without_replacement,
    compose_per_query_epsilon,
    ledger_charge,
)
from .queries import CountingQuery, Dataset, StatQuery, Transcript
from .scq import ScqConfig, ScqMechanism, answer_scq, counting_via_scq, naive_scq_via_count, scq_config
from .sqmech import SqMechanism, SqMechConfig, answer_query, config_from_accuracy, subsample

__version__ = "0.1.0"

__all__ = [
    "BudgetExhaustedError", "InvalidParameterError", "SampleSizeWarning",
    "exp_mechanism_probabilities", "exp_mechanism_select", "sample_laplace",
    "GdConfig", "LossSpec", "gd_answer", "gd_answer_boosted", "gradient_oracle", "noisy_gradient",
    "quadratic_loss",
    "BudgetLedger", "PrivacyParams", "amplify_with_replacement", "amplify_without_replacement",
    "compose_per_query_epsilon", "ledger_charge",
    "CountingQuery", "Dataset", "StatQuery", "Transcript",
    "ScqConfig", "ScqMechanism", "answer_scq", "counting_via_scq", "naive_scq_via_count", "scq_config",
    "SqMechanism", "SqMechConfig", "answer_query", "config_from_accuracy", "subsample",
]
