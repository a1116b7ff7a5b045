"""Predict restaurant ratings from the ratings of topic-representative users."""

__version__ = "0.1.0"
