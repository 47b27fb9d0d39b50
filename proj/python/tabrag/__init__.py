"""Retrieval-augmented tabular in-context learning toolkit."""

from ._tabrag import (
    ContextPool,
    ContractError,
    Dataset,
    Error,
    InputError,
    TransportError,
    auroc,
    binary_auroc,
    fit_power_law,
    generate_toy,
    load_dataset,
    make_split,
    minmax_normalize,
    nmae,
    run,
    validate_config,
)

__all__ = [
    "ContextPool",
    "ContractError",
    "Dataset",
    "Error",
    "InputError",
    "TransportError",
    "auroc",
    "binary_auroc",
    "fit_power_law",
    "generate_toy",
    "load_dataset",
    "make_split",
    "minmax_normalize",
    "nmae",
    "run",
    "validate_config",
]
