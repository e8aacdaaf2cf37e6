"""Modeling which word a person says next in a semantic fluency task.

The package scores next-item prediction functions (frequency baseline,
association norms, word embeddings, masked language models) against
recorded fluency lists, aggregates the scores across functions, and runs
adaptive per-list function selection.
"""

__version__ = "0.1.0"

from .corpus import (
    AssociationNorms,
    CategoryLexicon,
    ColumnMap,
    EmbeddingTable,
    FluencyList,
    FrequencyTable,
)
from .predictors import (
    Approach,
    FunctionRegistry,
    FunctionSpec,
    PredictionContext,
    PredictionDistribution,
)

__all__ = [
    "AssociationNorms",
    "CategoryLexicon",
    "ColumnMap",
    "EmbeddingTable",
    "FluencyList",
    "FrequencyTable",
    "Approach",
    "FunctionRegistry",
    "FunctionSpec",
    "PredictionContext",
    "PredictionDistribution",
    "__version__",
]
