"""Concrete groups and point-level operations."""
