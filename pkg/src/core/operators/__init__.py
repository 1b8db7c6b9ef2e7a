"""Cross-section, domain pieces and the collision operator."""
