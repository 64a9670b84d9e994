"""Virtual element discretization of 3D Stokes flow with BDDC domain decomposition."""
__version__ = "0.1.0"
