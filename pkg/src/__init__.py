"""Kinetic wave collision lab source package."""
