"""Adaptive finite elements with a DtN boundary condition for open-cavity scattering."""

__version__ = "0.1.0"
