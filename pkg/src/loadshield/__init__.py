"""Baseline load-profile models and incentive-weighted fraud scoring for smart-meter data."""

__version__ = "0.1.0"
