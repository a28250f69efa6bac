"""Dual-sourcing inventory: Tailored Base-Surge policies, exact dynamic
programming, lower bounds and optimality-gap certificates."""

__version__ = "0.1.0"
