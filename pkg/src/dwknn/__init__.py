"""Double-weighted k-nearest-neighbor classification and its evaluation harness."""

__version__ = "0.1.0"
