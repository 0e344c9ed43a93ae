"""THz spectra extraction, dual-plot rendering, and in-context-learning
classification harness with a deterministic mock backend."""

__version__ = "0.1.0"
