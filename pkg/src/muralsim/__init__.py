"""Deterministic multi-drone mural painting simulator and toolchain."""

__version__ = "0.1.0"
