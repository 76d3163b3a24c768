"""Fair influence maximization via adversarial graph embeddings."""

__version__ = "0.1.0"
