"""Commonsense concept graphs and graph-aware attention for instruction-
guided navigation on synthetic connectivity graphs."""

__version__ = "0.1.0"
