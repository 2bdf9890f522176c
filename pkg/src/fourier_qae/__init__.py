"""Amplitude and observable estimation from windowed Fourier sums of Grover-operator signals."""

__version__ = "0.1.0"
