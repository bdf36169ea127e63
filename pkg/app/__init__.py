"""Command-line application of the Heisenberg harmonic-analysis toolkit."""
