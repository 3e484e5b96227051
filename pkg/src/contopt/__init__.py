"""Level-set shape optimization of 2D linear-elastic structures in contact.

The package couples a Cartesian-grid level-set representation of the shape
with a conforming cut-mesh finite element discretization.  Contact with a
rigid obstacle is handled by a penalty formulation (semismooth Newton, with a
C^1-regularized variant) or by an augmented Lagrangian method; adjoint-based
shape derivatives feed an H^1-extended descent velocity that advects the
level set inside a monotone gradient loop.
"""

__version__ = "0.1.0"
