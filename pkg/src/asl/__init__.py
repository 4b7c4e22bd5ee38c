"""Polynomial cubic differentials and convex polygons in RP^2, numerically.

The package realizes both directions of the correspondence between
normalized polynomial cubic differentials on C and projective classes of
convex polygons: the forward map solves the coupled vortex equation and
integrates the affine frame field out to its polygonal limit; the inverse
map solves the support-function Monge-Ampere problem over a polygon and
reads off the Blaschke metric and Pick differential.
"""

__version__ = "0.1.0"
