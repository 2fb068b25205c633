"""heatlab: heat kernels on sampled metric measure spaces and their regularity."""

from __future__ import annotations

__version__ = "0.1.0"
