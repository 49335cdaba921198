"""Second-quantized operators acting on sector state vectors.

Anything with an ``apply(x, basis)`` method can be passed to :func:`expectation`
and :func:`covariance`; in particular fragments from
:mod:`fluidfrag.fragments` act directly through their factorized form.
"""

from __future__ import annotations

import dataclasses
from typing import Protocol

import numpy as np

from .basis import SectorBasis


class Operator(Protocol):
    def apply(self, x: np.ndarray, basis: SectorBasis) -> np.ndarray: ...


@dataclasses.dataclass(frozen=True)
class OneBodyOperator:
    """``sum_pq matrix[p, q] E_p^q + offset`` with a real symmetric ``matrix``."""

    matrix: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"one-body matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0):
            raise ValueError("one-body matrix is not symmetric")
        object.__setattr__(self, "matrix", m)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray, basis: SectorBasis) -> np.ndarray:
        out = basis.apply_one_body(self.matrix, x)
        if self.offset:
            out += self.offset * x
        return out

    def __add__(self, other: OneBodyOperator) -> OneBodyOperator:
        return OneBodyOperator(self.matrix + other.matrix, self.offset + other.offset)

    def __mul__(self, s: float) -> OneBodyOperator:
        return OneBodyOperator(s * self.matrix, s * self.offset)

    __rmul__ = __mul__


@dataclasses.dataclass(frozen=True)
class TwoBodyOperator:
    """``sum_pqrs tensor[p,q,r,s] E_p^q E_r^s + one_body + offset``."""

    tensor: np.ndarray
    one_body: OneBodyOperator | None = None
    offset: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.tensor, dtype=np.float64)
        n = g.shape[0]
        if g.shape != (n, n, n, n):
            raise ValueError(f"two-body tensor must have shape (N, N, N, N), got {g.shape}")
        if self.one_body is not None and self.one_body.n_modes != n:
            raise ValueError("one-body part and tensor disagree on the number of modes")
        object.__setattr__(self, "tensor", g)

    @property
    def n_modes(self) -> int:
        return self.tensor.shape[0]

    def apply(self, x: np.ndarray, basis: SectorBasis) -> np.ndarray:
        n2 = self.n_modes**2
        if basis.n_modes != self.n_modes:
            raise ValueError(
                f"operator on {self.n_modes} modes applied in a {basis.n_modes}-mode sector"
            )
        y = basis.excite_all(x)
        out = basis.contract(self.tensor.reshape(n2, n2) @ y)
        if self.one_body is not None:
            out += self.one_body.apply(x, basis)
        if self.offset:
            out += self.offset * x
        return out


def hamiltonian_operator(spin_tensors, include_nuclear: bool = False) -> TwoBodyOperator:
    """Electronic Hamiltonian from :class:`~fluidfrag.tensors.SpinTensors`."""
    return TwoBodyOperator(
        tensor=spin_tensors.g,
        one_body=OneBodyOperator(spin_tensors.h),
        offset=spin_tensors.e_nuc if include_nuclear else 0.0,
    )


def _vec(state) -> tuple[np.ndarray, SectorBasis]:
    return state.amplitudes, state.basis


def apply_one_body(op: OneBodyOperator, state) -> np.ndarray:
    x, basis = _vec(state)
    if op.n_modes != basis.n_modes:
        raise ValueError(
            f"operator on {op.n_modes} modes applied in a {basis.n_modes}-mode sector"
        )
    return op.apply(x, basis)


def apply_two_body(op: TwoBodyOperator, state) -> np.ndarray:
    x, basis = _vec(state)
    return op.apply(x, basis)


def expectation(op: Operator, state) -> float:
    x, basis = _vec(state)
    return float(x @ op.apply(x, basis))


def covariance(a: Operator, b: Operator, state, symmetrized: bool = False) -> float:
    """``<a b> - <a><b>`` for hermitian ``a``, ``b`` on a real state.

    With ``symmetrized=True`` returns ``Cov(a, b) + Cov(b, a)``.
    """
    x, basis = _vec(state)
    ax = a.apply(x, basis)
    bx = ax if b is a else b.apply(x, basis)
    cov = float(ax @ bx - (x @ ax) * (x @ bx))
    return 2 * cov if symmetrized else cov


def variance(a: Operator, state) -> float:
    return covariance(a, a, state)
