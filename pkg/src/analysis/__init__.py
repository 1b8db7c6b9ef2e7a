"""Scaling fits, threshold sweeps, Picard iteration, conservation and cascade exponents."""
