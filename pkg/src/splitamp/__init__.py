"""Split-amplitude coupled cluster driven by external wavefunction overlaps."""
__version__ = "0.1.0"
