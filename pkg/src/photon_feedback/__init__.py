"""Feedback-stabilized continuous measurement of cavity photon number."""

from .fock import HilbertConfig
from .sme import InitialState, SimParams, simulate_trajectory

__all__ = ["HilbertConfig", "InitialState", "SimParams", "simulate_trajectory"]
