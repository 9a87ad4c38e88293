"""Recoverability verdicts for selectively missing data, their empirical
demonstration on discrete causal models, and detail-free fair multi-stage
selection with a centralized benchmark."""

from . import datagen, df2, graphs, metrics, models, reports, scenarios, simplex

__all__ = [
    "datagen",
    "df2",
    "graphs",
    "metrics",
    "models",
    "reports",
    "scenarios",
    "simplex",
]

__version__ = "0.1.0"
