"""Dual-arm solar panel assembly control stack and simulator."""

__version__ = "0.1.0"
