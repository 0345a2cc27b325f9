"""Phase singularities of complex arithmetic random waves on the flat torus."""

__version__ = "0.1.0"
