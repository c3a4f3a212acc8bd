"""Encrypted least squares system identification on an emulated leveled scheme."""

__version__ = "0.1.0"
