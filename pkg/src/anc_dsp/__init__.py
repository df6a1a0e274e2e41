"""Adaptive noise cancellation and ECG conditioning for cardiac auscultation."""
__version__ = "0.1.0"
