"""Linear FEM toolkit for anisotropic diffusion-convection-reaction problems."""

__version__ = "0.1.0"
