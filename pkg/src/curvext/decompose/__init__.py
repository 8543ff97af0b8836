"""Interval classes, chips, Whitney cubes, zonotope audits and profile extraction."""
