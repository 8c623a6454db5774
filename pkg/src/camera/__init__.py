"""Pinhole cameras on the unit sphere and pose distributions."""
