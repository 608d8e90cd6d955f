"""diffeokit: simplicial sets, smooth maps and realizations at desk scale."""
from __future__ import annotations

from ._accel import backend_name
from .report import VerificationReport

__version__ = "0.1.0"

__all__ = ["VerificationReport", "backend_name", "__version__"]
