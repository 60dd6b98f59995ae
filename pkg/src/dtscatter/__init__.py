"""Parametric-log DTCWT scattering features."""
