"""Sparse variational GP dynamics models whose prior mean is an explicit physics feature map."""

from ._evgp import (
    ConfigError,
    Dataset,
    DimensionMismatch,
    EvgpError,
    Model,
    NonFiniteLoss,
    NotPsdWithinJitter,
    evaluate,
    features,
    load_model,
    read_csv,
    simulate,
    step,
    toy_dataset,
    train,
    write_csv,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "DimensionMismatch",
    "EvgpError",
    "Model",
    "NonFiniteLoss",
    "NotPsdWithinJitter",
    "evaluate",
    "features",
    "load_model",
    "read_csv",
    "simulate",
    "step",
    "toy_dataset",
    "train",
    "write_csv",
]
