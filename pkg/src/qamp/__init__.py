"""Detectability of frustrated k-QSAT systems and gap amplification by t-walks, checked numerically."""

from . import amp, corpus, detect, linalg, qsat, walks, xy
from .detect import BoundParams, delta_sq, find_r
from .qsat import Constraint, QSatSystem
from .walks import Graph

__version__ = "0.1.0"

__all__ = [
    "BoundParams",
    "Constraint",
    "Graph",
    "QSatSystem",
    "amp",
    "corpus",
    "delta_sq",
    "detect",
    "find_r",
    "linalg",
    "qsat",
    "walks",
    "xy",
]
