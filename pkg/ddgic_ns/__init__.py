"""
ddgic-ns: direct discontinuous Galerkin method with interface correction for
the 2-D compressible Navier-Stokes equations on unstructured triangles.
"""

__version__ = "0.1.0"
