"""Evolving-schema extraction benchmarks and schema-constrained decoding."""

__version__ = "0.1.0"
