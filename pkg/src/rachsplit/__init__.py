"""Analytical and simulated RACH preamble partitioning between H2H and M2M traffic."""

__version__ = "0.1.0"
