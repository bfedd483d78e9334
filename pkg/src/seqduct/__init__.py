"""Encoder-decoder RNN training lab for deterministic string transductions.

The package pairs small recurrent sequence-to-sequence models (built on a
self-contained float64 autodiff core) with exact oracles for the string
functions the models are trained on, so that generalization across input
lengths can be measured precisely.
"""

from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DivergenceError,
    SeqductError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "DivergenceError",
    "SeqductError",
    "ShapeError",
    "__version__",
]
