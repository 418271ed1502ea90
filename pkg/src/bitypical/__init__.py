"""Bipartite typical subspaces built from Schur-Weyl projectors."""
from __future__ import annotations

__version__ = "0.1.0"

from .partitions import YoungFrame, dim_irrep, enumerate_frames
from .symgroup import Permutation, character
from .tensorspace import ActionKind, TensorSpace
from .projectors import central_projectors, refinement, typical_projector
from .typicality import build_phi, exact_suite, theorem_margins
