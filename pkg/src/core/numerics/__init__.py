"""Adaptive Gauss-Kronrod quadrature."""
