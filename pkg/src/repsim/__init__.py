"""Reputational cheap talk with a panel of experts: equilibrium, design, simulation, estimation."""

__version__ = "0.1.0"
