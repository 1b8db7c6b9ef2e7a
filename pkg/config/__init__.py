"""Configuration management for the kinetic wave collision lab."""
