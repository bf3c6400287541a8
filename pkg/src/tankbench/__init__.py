"""Three-tank forecasting robustness benchmark."""

__version__ = "0.1.0"
