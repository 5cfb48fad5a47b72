"""Scheduling, placement and routing of FT-operation circuits onto a trapped-ion ULB."""

__version__ = "0.1.0"
