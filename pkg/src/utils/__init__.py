"""Numerical helpers shared by the simulator and the experiments."""

__all__ = ["jit", "statistics"]
