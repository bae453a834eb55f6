"""Pareto boundaries of the K-user instantaneous amplify-and-forward interference relay channel."""

__version__ = "0.1.0"
