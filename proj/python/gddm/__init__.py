"""Diffusion in image, gradient and Laplacian domains."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

DOMAINS = ("image", "gradient", "laplacian")
