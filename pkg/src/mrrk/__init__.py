"""Multi-rate Runge-Kutta integration toolkit."""

__version__ = "0.1.0"
