"""Simulation and inversion of variable-pulse-duration Ramsey (VPDR) signals
for bias-field-free NV-ensemble vector magnetometry."""

__version__ = "0.1.0"
