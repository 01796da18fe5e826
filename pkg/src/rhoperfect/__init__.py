"""Correlation ceilings for subjectively rated datasets."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DegeneratePolicy,
    Item,
    Rating,
    RatingsTable,
    RhoEstimate,
    TableWarning,
    WarningCode,
    expected_conditional_variance,
    grand_variance,
    item_conditional_variance,
    item_mean,
    pearson_corr,
    rho_perfect,
    validate_table,
)

__all__ = [
    "DegeneratePolicy",
    "Item",
    "Rating",
    "RatingsTable",
    "RhoEstimate",
    "TableWarning",
    "WarningCode",
    "expected_conditional_variance",
    "grand_variance",
    "item_conditional_variance",
    "item_mean",
    "pearson_corr",
    "rho_perfect",
    "validate_table",
]
