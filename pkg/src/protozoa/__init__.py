"""Artificial protozoa optimizer with benchmark, engineering-design and image-thresholding tooling."""

__version__ = "0.1.0"

from .apo import ApoParams, ApoResult, apo_step, optimize
from .baseline import random_search
from .core import Bounds, Candidate, ObjectiveFn, Population, make_rng

__all__ = [
    "ApoParams",
    "ApoResult",
    "Bounds",
    "Candidate",
    "ObjectiveFn",
    "Population",
    "apo_step",
    "make_rng",
    "optimize",
    "random_search",
]
