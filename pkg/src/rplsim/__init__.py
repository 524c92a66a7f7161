"""rplsim: deterministic RPL/TSCH convergecast simulator with congestion-aware parent swapping."""

__version__ = "0.1.0"
