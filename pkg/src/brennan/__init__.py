"""Integrability exponent of a grafted quasidisk via Schwarz-Christoffel maps."""

__version__ = "0.1.0"
