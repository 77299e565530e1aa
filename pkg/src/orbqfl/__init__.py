"""Co-simulation of ring-pass quantum federated learning over a LEO constellation."""

__version__ = "0.1.0"
