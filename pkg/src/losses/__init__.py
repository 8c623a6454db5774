"""Regularisation losses and sphere initialisation of the field network."""
