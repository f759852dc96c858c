"""Graph question answering over textual graphs.

The pipeline retrieves a prize-collecting subgraph around the question,
routes the question to a cluster of demonstration examples, encodes the
subgraph with a question-conditioned message passing network, and hands a
soft graph token plus the flattened subgraph to a frozen language model.
"""

from .errors import DataError, GraphQAError, ProviderError, StageError, UsageError

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "GraphQAError",
    "ProviderError",
    "StageError",
    "UsageError",
    "__version__",
]
