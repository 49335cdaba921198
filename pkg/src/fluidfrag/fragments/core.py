"""Measurable Hamiltonian fragments and their serialization."""

from __future__ import annotations

import dataclasses
import enum
import json
from typing import Sequence

import numpy as np

from ..fock.basis import SectorBasis
from ..tensors import spin_expand_matrix

ORTHO_ATOL = 1e-10


class FragmentKind(str, enum.Enum):
    ONE_ELECTRON = "one_electron"
    TWO_ELECTRON = "two_electron"


def fix_row_signs(u: np.ndarray) -> np.ndarray:
    """Flip each row so that its largest-magnitude entry is positive."""
    u = np.array(u, dtype=np.float64)
    for row in u:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return u


def orbital_projectors(u: np.ndarray) -> np.ndarray:
    """``P[i] = outer(u[i], u[i])``, the one-body matrix of ``U^dag n_i U``."""
    return np.einsum("ia,ib->iab", u, u)


@dataclasses.dataclass(frozen=True)
class Fragment:
    """One measurable piece of the Hamiltonian.

    For ``kind == two_electron`` the operator is

    ``sum_ij lambda_tilde[i, j] P_i P_j + sum_p linear[p] O_p + offset``

    where ``P_i`` is the spin-summed rotated number operator of spatial orbital
    ``i`` and ``O_p`` the rotated number operator of spin orbital ``p = 2i + s``.
    ``linear`` holds one-electron weight moved out of (negative) or into the
    fragment by repartitioning.

    For ``kind == one_electron`` only the diagonal of ``lambda_tilde`` is used:
    ``sum_i lambda_tilde[i, i] P_i + offset``.
    """

    kind: FragmentKind
    u_tilde: np.ndarray
    lambda_tilde: np.ndarray
    offset: float = 0.0
    rank1_factor: np.ndarray | None = None
    linear: np.ndarray | None = None

    def __post_init__(self):
        kind = FragmentKind(self.kind)
        u = np.asarray(self.u_tilde, dtype=np.float64)
        lam = np.asarray(self.lambda_tilde, dtype=np.float64)
        n = u.shape[0]
        if u.shape != (n, n) or lam.shape != (n, n):
            raise ValueError("u_tilde and lambda_tilde must be square and of equal size")
        if not np.allclose(u @ u.T, np.eye(n), atol=ORTHO_ATOL, rtol=0):
            raise ValueError("u_tilde is not orthogonal")
        if not np.allclose(lam, lam.T, atol=1e-12, rtol=0):
            raise ValueError("lambda_tilde is not symmetric")
        if kind is FragmentKind.ONE_ELECTRON and np.any(lam != np.diag(np.diag(lam))):
            raise ValueError("one-electron fragments carry a diagonal lambda_tilde")
        eta = self.rank1_factor
        if eta is not None:
            eta = np.asarray(eta, dtype=np.float64)
            if not np.allclose(np.outer(eta, eta), lam, atol=1e-10, rtol=0):
                raise ValueError("rank1_factor does not reproduce lambda_tilde")
        lin = self.linear
        if lin is not None:
            lin = np.asarray(lin, dtype=np.float64)
            if lin.shape != (2 * n,):
                raise ValueError("linear must have one entry per spin orbital")
            if kind is FragmentKind.ONE_ELECTRON:
                raise ValueError("one-electron fragments do not carry a linear part")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "u_tilde", u)
        object.__setattr__(self, "lambda_tilde", lam)
        object.__setattr__(self, "rank1_factor", eta)
        object.__setattr__(self, "linear", lin)

    @property
    def n_orbitals(self) -> int:
        return self.u_tilde.shape[0]

    @property
    def n_modes(self) -> int:
        return 2 * self.n_orbitals

    @property
    def epsilon(self) -> np.ndarray:
        return np.diag(self.lambda_tilde).copy()

    def linear_part(self) -> np.ndarray:
        return np.zeros(self.n_modes) if self.linear is None else self.linear

    def spin_rotation(self) -> np.ndarray:
        return spin_expand_matrix(self.u_tilde)

    def spin_lambda(self) -> np.ndarray:
        """Spin-orbital coefficients ``lambda_pq`` of ``sum_pq lambda_pq n_p n_q`` in the
        fragment frame, with linear terms folded onto the diagonal (``n_p**2 = n_p``)."""
        if self.kind is FragmentKind.ONE_ELECTRON:
            return np.diag(np.repeat(self.epsilon, 2))
        lam = np.kron(self.lambda_tilde, np.ones((2, 2)))
        return lam + np.diag(self.linear_part())

    def spatial_one_body(self) -> np.ndarray:
        """Spatial one-body matrix of the one-electron operator content.

        Only defined when the linear part is spin-paired.
        """
        u = self.u_tilde
        if self.kind is FragmentKind.ONE_ELECTRON:
            return u.T @ np.diag(self.epsilon) @ u
        lin = self.linear_part().reshape(-1, 2)
        if not np.allclose(lin[:, 0], lin[:, 1], atol=0, rtol=0):
            raise ValueError("linear part is not spin-paired")
        return u.T @ np.diag(lin[:, 0]) @ u

    def spin_one_body(self) -> np.ndarray:
        """Spin-orbital one-body matrix of the one-electron operator content."""
        us = self.spin_rotation()
        if self.kind is FragmentKind.ONE_ELECTRON:
            return us.T @ np.diag(np.repeat(self.epsilon, 2)) @ us
        return us.T @ np.diag(self.linear_part()) @ us

    def two_body_tensor(self) -> np.ndarray:
        """Spatial ``g_tilde`` contribution ``sum_pq lambda_pq u_pi u_pj u_qk u_ql``."""
        n = self.n_orbitals
        if self.kind is FragmentKind.ONE_ELECTRON:
            return np.zeros((n,) * 4)
        u = self.u_tilde
        return np.einsum("pq,pi,pj,qk,ql->ijkl", self.lambda_tilde, u, u, u, u, optimize=True)

    def apply(self, x: np.ndarray, basis: SectorBasis) -> np.ndarray:
        if basis.n_modes != self.n_modes:
            raise ValueError(
                f"fragment on {self.n_modes} modes applied in a {basis.n_modes}-mode sector"
            )
        out = self.offset * x if self.offset else np.zeros_like(x)
        if self.kind is FragmentKind.ONE_ELECTRON:
            return out + basis.apply_one_body(self.spin_one_body(), x)
        proj = [spin_expand_matrix(p) for p in orbital_projectors(self.u_tilde)]
        px = np.array([basis.apply_one_body(p, x) for p in proj])
        inner = self.lambda_tilde @ px
        for p, v in zip(proj, inner):
            out = out + basis.apply_one_body(p, v)
        if self.linear is not None and np.any(self.linear):
            out = out + basis.apply_one_body(self.spin_one_body(), x)
        return out

    def diagonal_values(self, occupations: np.ndarray) -> np.ndarray:
        """Fragment eigenvalue for each row of a 0/1 occupation matrix (fragment frame)."""
        lam = self.spin_lambda()
        return np.einsum("sp,pq,sq->s", occupations, lam, occupations) + self.offset

    def replace(self, **changes) -> Fragment:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "u_tilde": self.u_tilde.ravel().tolist(),
            "lambda_tilde": self.lambda_tilde.ravel().tolist(),
            "offset": float(self.offset),
        }
        if self.rank1_factor is not None:
            d["rank1_factor"] = self.rank1_factor.tolist()
        if self.linear is not None:
            d["linear"] = self.linear.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, n_orbitals: int) -> Fragment:
        shape = (n_orbitals, n_orbitals)
        return cls(
            kind=FragmentKind(d["kind"]),
            u_tilde=np.array(d["u_tilde"], dtype=np.float64).reshape(shape),
            lambda_tilde=np.array(d["lambda_tilde"], dtype=np.float64).reshape(shape),
            offset=float(d.get("offset", 0.0)),
            rank1_factor=None if d.get("rank1_factor") is None else np.array(d["rank1_factor"]),
            linear=None if d.get("linear") is None else np.array(d["linear"]),
        )


@dataclasses.dataclass(frozen=True)
class FragmentSet:
    h0: Fragment
    two_body: tuple[Fragment, ...]
    source: str
    residual_l1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "two_body", tuple(self.two_body))
        if self.h0.kind is not FragmentKind.ONE_ELECTRON:
            raise ValueError("h0 must be a one-electron fragment")
        n = self.h0.n_orbitals
        for f in self.two_body:
            if f.kind is not FragmentKind.TWO_ELECTRON:
                raise ValueError("two_body entries must be two-electron fragments")
            if f.n_orbitals != n:
                raise ValueError("fragments disagree on the number of orbitals")
        if self.source.upper() == "LR" and len(self.two_body) > n * (n + 1) // 2:
            raise ValueError("LR sets cannot exceed N_o (N_o + 1) / 2 fragments")

    @property
    def n_orbitals(self) -> int:
        return self.h0.n_orbitals

    @property
    def n_fragments(self) -> int:
        """Number of two-electron fragments ``N_f``."""
        return len(self.two_body)

    @property
    def all_fragments(self) -> tuple[Fragment, ...]:
        return (self.h0,) + self.two_body

    def __len__(self) -> int:
        return len(self.two_body) + 1

    def offsets(self) -> float:
        return sum(f.offset for f in self.all_fragments)

    def to_dict(self) -> dict:
        return {
            "format": "fluidfrag.fragments/1",
            "source": self.source,
            "n_orbitals": self.n_orbitals,
            "residual_l1": float(self.residual_l1),
            "h0": self.h0.to_dict(),
            "two_body": [f.to_dict() for f in self.two_body],
        }

    @classmethod
    def from_dict(cls, d: dict) -> FragmentSet:
        n = int(d["n_orbitals"])
        return cls(
            h0=Fragment.from_dict(d["h0"], n),
            two_body=tuple(Fragment.from_dict(f, n) for f in d["two_body"]),
            source=d["source"],
            residual_l1=float(d.get("residual_l1", 0.0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> FragmentSet:
        return cls.from_dict(json.loads(text))


def diagonalize_one_electron(h_tilde: np.ndarray) -> Fragment:
    """Eigen-decompose ``h_tilde = u.T @ diag(eps) @ u`` (ascending ``eps``)."""
    h = np.asarray(h_tilde, dtype=np.float64)
    if not np.allclose(h, h.T, atol=1e-12, rtol=0):
        raise ValueError("h_tilde is not symmetric")
    eps, vecs = np.linalg.eigh((h + h.T) / 2)
    u = fix_row_signs(vecs.T)
    return Fragment(FragmentKind.ONE_ELECTRON, u_tilde=u, lambda_tilde=np.diag(eps))


def reconstruct(fragments: FragmentSet) -> tuple[np.ndarray, np.ndarray]:
    """Spatial ``(h_tilde, g_tilde)`` of the summed fragments (offsets excluded)."""
    h = fragments.h0.spatial_one_body()
    n = fragments.n_orbitals
    g = np.zeros((n,) * 4)
    for f in fragments.two_body:
        g += f.two_body_tensor()
        h = h + f.spatial_one_body()
    return h, g


def reconstruct_spin(fragments: FragmentSet) -> tuple[np.ndarray, np.ndarray]:
    """Spin-orbital one-body matrix and spatial ``g_tilde`` of the summed fragments.

    Works for fragments whose linear parts are not spin-paired.
    """
    h = fragments.h0.spin_one_body()
    n = fragments.n_orbitals
    g = np.zeros((n,) * 4)
    for f in fragments.two_body:
        g += f.two_body_tensor()
        h = h + f.spin_one_body()
    return h, g


def l1_norm(t: np.ndarray) -> float:
    return float(np.abs(t).sum())


def make_set(h0: Fragment, two_body: Sequence[Fragment], source: str, g_tilde) -> FragmentSet:
    n = h0.n_orbitals
    fit = np.zeros((n,) * 4)
    for f in two_body:
        fit += f.two_body_tensor()
    return FragmentSet(h0, tuple(two_body), source, residual_l1=l1_norm(g_tilde - fit))
