"""pgdflow: finite-volume SIMPLE solver plus a nonintrusive PGD reduced-order layer
for parametrised steady incompressible laminar flows."""

__version__ = "0.1.0"

from .mesh import Mesh2D, BoundarySpec, build_cartesian, patch_faces  # noqa: F401
from .fv import Field, l2_norm  # noqa: F401
