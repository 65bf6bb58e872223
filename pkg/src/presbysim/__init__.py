"""Tunable-lens presbyopia simulation: controller, virtual bench and blur renderer."""

__version__ = "0.1.0"
