"""Exact linear algebra in a fixed-electron-number occupation basis."""

from .basis import SectorBasis
from .kernels import BACKEND
from .operators import (
    OneBodyOperator,
    TwoBodyOperator,
    apply_one_body,
    apply_two_body,
    covariance,
    expectation,
    hamiltonian_operator,
    variance,
)
from .states import (
    ConvergenceError,
    ProxyKind,
    ProxyState,
    ground_state,
    rotate_state,
    rotation_generator,
)

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "OneBodyOperator",
    "ProxyKind",
    "ProxyState",
    "SectorBasis",
    "TwoBodyOperator",
    "apply_one_body",
    "apply_two_body",
    "covariance",
    "expectation",
    "ground_state",
    "hamiltonian_operator",
    "rotate_state",
    "rotation_generator",
    "variance",
]
