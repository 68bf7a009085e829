"""Numerical checks for wave scattering outside two strictly convex obstacles.

Subpackages and modules:

* :mod:`convexscatter.geometry` - obstacles, ray intersection, trapped segment
* :mod:`convexscatter.billiards` - broken-ray flow, trapping and reconcentration probes
* :mod:`convexscatter.morawetz` - the two-focus multiplier weight and its certificates
* :mod:`convexscatter.wavesolver` - finite-difference solver and diagnostics
* :mod:`convexscatter.cli` - scenario runner
"""
__version__ = "0.1.0"
