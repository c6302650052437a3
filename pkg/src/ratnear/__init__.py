"""Rational points near manifolds: counting them and certifying where they lie."""
from . import cells, dual, frames, manifold, multivector, pbox, rats, ubiquity
from .manifold import Box, Manifold, catalog

__version__ = "0.1.0"

__all__ = ["Box", "Manifold", "catalog", "cells", "dual", "frames", "manifold", "multivector", "pbox", "rats",
           "ubiquity", "__version__"]
