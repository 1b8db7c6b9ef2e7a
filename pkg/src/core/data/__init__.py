"""Data profiles n(w) and weighted norms."""
