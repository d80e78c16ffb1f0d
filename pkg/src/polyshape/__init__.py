"""
polyshape: shape derivatives of electrostatic boundary measurements for
polygonal inclusions.

A 2D numerical toolkit around the conductivity equation with a polygonal
inclusion of contrast k: forward finite element solves, corner-exponent
analysis, three independent routes to the shape derivative of the
Neumann-to-Dirichlet measurements (boundary-integral pairing, material
derivative, singularity-enriched transmission problem), Taylor-remainder
and route-equivalence verification, and a Gauss-Newton reconstruction of
polygon vertices from two current/voltage pairs.
"""

__version__ = "0.1.0"
