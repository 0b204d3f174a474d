"""Contrastive user simulation for measuring how easily users escape a
recommender's filter bubble (Bubble Escape Potential, BEP)."""

__version__ = "0.1.0"
