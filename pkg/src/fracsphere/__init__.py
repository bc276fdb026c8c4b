"""Time-changed rotational diffusion on the sphere and isotropic random
fields composed with it."""

__version__ = "0.1.0"
