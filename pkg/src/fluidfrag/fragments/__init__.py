"""Initial measurable fragments: diagonal one-electron part plus LR or GFRO two-electron parts."""

from .core import (
    Fragment,
    FragmentKind,
    FragmentSet,
    diagonalize_one_electron,
    fix_row_signs,
    orbital_projectors,
    reconstruct,
    reconstruct_spin,
)
from .gfro import GFROConfig, GFROStagnationError, gfro_decompose
from .lr import lr_decompose

__all__ = [
    "Fragment",
    "FragmentKind",
    "FragmentSet",
    "GFROConfig",
    "GFROStagnationError",
    "diagonalize_one_electron",
    "fix_row_signs",
    "gfro_decompose",
    "lr_decompose",
    "orbital_projectors",
    "reconstruct",
    "reconstruct_spin",
]
