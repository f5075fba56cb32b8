"""Synthetic 12-lead ECG page generator with synchronized ground truth."""

__version__ = "0.1.0"
