"""Strictly convex caps with prescribed Weingarten curvature.

Core numerical library plus an HTTP service (`weingarten.service`) and a thin
command-line client (`weingarten.cli`).
"""

__version__ = "0.1.0"
