"""Agent-based skyscraper evacuation with staggered per-floor start times."""

__version__ = "0.1.0"
