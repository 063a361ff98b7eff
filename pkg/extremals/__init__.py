"""Extremal Sobolev functions - mountain-pass solver, verification and level-set analysis."""

__version__ = "0.1.0"
