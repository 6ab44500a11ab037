"""Quantum bit string commitment with polarization of mesoscopic coherent states"""

__version__ = "0.1.0"
