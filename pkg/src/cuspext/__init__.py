"""Numerical toolkit for Sobolev extension across planar cusps.

The package builds cuspidal domains, the quasiconformal-type maps that flatten
them, their distortion integrability, reflection-based extension operators and
the sharpness tests that show the exponent losses are necessary.
"""

__version__ = "0.1.0"
