"""Differentiable fixed-step ODE toolkit."""

__version__ = "0.1.0"
