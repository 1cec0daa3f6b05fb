"""Unit tests for the lesion-symmetry package."""
