"""Groupwise preference-feedback workbench for small RL tasks."""

from ._kernels import active_backend

__version__ = "0.1.0"

__all__ = ["active_backend", "__version__"]
