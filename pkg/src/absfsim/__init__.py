"""Two-tier macro/femto downlink simulator with per-femtocell ABSF muting."""

__version__ = "0.1.0"
