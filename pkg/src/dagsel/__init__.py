"""Learned model selection for multi-step pipelines described by task DAGs."""

__version__ = "0.1.0"
