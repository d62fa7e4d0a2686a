"""Approximate Bayesian calibration of a central-place foraging model for
bumblebee visitation counts."""

__version__ = "0.1.0"
