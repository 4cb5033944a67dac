"""Nonconforming finite elements for the tensor-valued Stokes problem and a
decoupled low-order solver for the 3D triharmonic equation."""

from .mesh import Mesh, build_cube_mesh, build_lshape_mesh

__version__ = "0.1.0"

__all__ = ["Mesh", "build_cube_mesh", "build_lshape_mesh", "__version__"]
