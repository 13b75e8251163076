"""Topological features of token transaction networks for price-anomaly forecasting."""

__version__ = "0.1.0"
