"""Implicit fields: the FiLM-SIREN network, analytic SDFs and renderable scenes."""
