"""Discrete conditional independence: structure, derivation witnesses, information inequalities."""

from ._core import (
    CondIndError,
    ValidationReport,
    Witness,
    block_split,
    check_theorem1,
    check_theorem3,
    conditional_entropy,
    d_epsilon,
    d_epsilon_chain,
    derive,
    gamma_sweep,
    lemma12_bound,
    mutual_information,
    parse_matrix,
    r_complexity_bound,
    rate_bound,
    sharp_good,
    validate_distribution,
)

__all__ = [
    "CondIndError",
    "ValidationReport",
    "Witness",
    "block_split",
    "check_theorem1",
    "check_theorem3",
    "conditional_entropy",
    "d_epsilon",
    "d_epsilon_chain",
    "derive",
    "gamma_sweep",
    "lemma12_bound",
    "mutual_information",
    "parse_matrix",
    "r_complexity_bound",
    "rate_bound",
    "sharp_good",
    "validate_distribution",
]
