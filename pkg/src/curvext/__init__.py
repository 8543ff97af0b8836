"""Numerical toolkit for extension operators on polynomial curves."""
