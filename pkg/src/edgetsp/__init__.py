"""Edge-based topological signal processing for task decoding from node time series."""

__version__ = "0.1.0"
