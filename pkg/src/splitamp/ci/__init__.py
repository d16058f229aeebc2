"""Determinant-basis CI: enumeration, diagonalization and overlap extraction."""
from .determinants import (
    Determinant,
    ExcitationLabel,
    apply_excitation,
    count_determinants,
    enumerate_determinants,
    excitation_label,
    excitation_phase,
    reference_determinant,
    spin_conserving_labels,
)
from .kernels import BACKEND
from .overlaps import C0_THRESHOLD, ActiveMap, OverlapSet, active_map_for, extract_overlaps
from .solver import davidson, fci, hamiltonian_matrix, solve_ci
from .state import CIVector

__all__ = [
    "ActiveMap", "BACKEND", "C0_THRESHOLD", "CIVector", "Determinant", "ExcitationLabel", "OverlapSet",
    "active_map_for", "apply_excitation", "count_determinants", "davidson", "enumerate_determinants",
    "excitation_label", "excitation_phase", "extract_overlaps", "fci", "hamiltonian_matrix",
    "reference_determinant", "solve_ci", "spin_conserving_labels",
]
