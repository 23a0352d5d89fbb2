"""Desk-scale RGB-D tracking: hierarchical fusion, online discriminative filter, metrics, synthetic sequences."""

__version__ = "0.1.0"
