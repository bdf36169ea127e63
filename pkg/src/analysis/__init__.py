"""Sectors, sampled functions, dyadic systems, oscillation and commutator experiments."""
