"""Tangent-plane finite-element solver for the Landau-Lifshitz-Gilbert equation with spin torques."""

__version__ = "0.1.0"
