"""Sleep-period maximizing power/time allocation for layered video over SFN broadcast."""

__version__ = "0.1.0"
