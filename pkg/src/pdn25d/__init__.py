"""2.5D hierarchical PDN modeling, analysis and decap optimization."""

__version__ = "0.1.0"
