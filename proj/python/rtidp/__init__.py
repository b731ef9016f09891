"""Diffusion policy inference with real-time iteration warm starts."""

from rtidp._core import *  # noqa: F401,F403
from rtidp._core import __doc__  # noqa: F401

__version__ = "0.1.0"
