"""Kernel, quadrature, data profiles and geometry of the isotropic collision operator."""
