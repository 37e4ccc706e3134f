"""Robustness and resilience evaluation of grid-operating agents under sensor perturbation."""

__version__ = "0.1.0"
