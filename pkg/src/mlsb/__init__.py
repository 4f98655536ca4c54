"""Open dispersing billiards: marked length and Lyapunov spectra and their inversion."""

__version__ = "0.1.0"
