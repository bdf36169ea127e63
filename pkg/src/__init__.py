"""Source code package."""
