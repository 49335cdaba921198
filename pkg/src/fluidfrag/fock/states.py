"""Proxy wavefunctions (HF, CISD, FCI) and orbital rotations of states."""

from __future__ import annotations

import dataclasses
import enum
import logging

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .basis import SectorBasis
from .operators import Operator

logger = logging.getLogger(__name__)

EIGEN_TOL = 1e-10
DEGENERACY_TOL = 1e-8
# sectors up to this size are diagonalized densely
DENSE_DIM = 64


class ProxyKind(str, enum.Enum):
    HF = "HF"
    CISD = "CISD"
    FCI = "FCI"

    @classmethod
    def parse(cls, value) -> ProxyKind:
        return value if isinstance(value, cls) else cls(str(value).upper())


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual norm {residual:.3e})")
        self.residual = residual


@dataclasses.dataclass(frozen=True)
class ProxyState:
    basis: SectorBasis
    amplitudes: np.ndarray
    kind: ProxyKind
    energy: float

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.float64)
        if amps.shape != (self.basis.dim,):
            raise ValueError("amplitude vector does not match the basis")
        if abs(np.linalg.norm(amps) - 1) > 1e-10:
            raise ValueError("proxy state is not normalized")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "kind", ProxyKind.parse(self.kind))


def excitation_level(words: np.ndarray, reference: int) -> np.ndarray:
    return np.bitwise_count(np.asarray(words) ^ reference) // 2


def _lowest(apply, dim: int, v0: np.ndarray) -> tuple[float, np.ndarray]:
    if dim <= DENSE_DIM:
        mat = np.column_stack([apply(col) for col in np.eye(dim)])
        vals, vecs = np.linalg.eigh((mat + mat.T) / 2)
    else:
        op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=apply, dtype=np.float64)
        k = min(4, dim - 2)
        vals, vecs = scipy.sparse.linalg.eigsh(
            op, k=k, which="SA", v0=v0, tol=EIGEN_TOL, maxiter=max(1000, 20 * dim)
        )
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    block = vals - vals[0] < DEGENERACY_TOL
    if block.sum() > 1:
        # degenerate ground state: take the member with the largest reference overlap
        sub = vecs[:, block]
        proj = sub @ (sub.T @ v0)
        if np.linalg.norm(proj) > 1e-8:
            vec = proj / np.linalg.norm(proj)
        else:
            vec = sub[:, 0]
        logger.info("degenerate ground state (%d-fold); picked max reference overlap", block.sum())
    else:
        vec = vecs[:, 0]
    ref = int(np.argmax(np.abs(v0)))
    pivot = ref if abs(vec[ref]) > 1e-12 else int(np.argmax(np.abs(vec)))
    if vec[pivot] < 0:
        vec = -vec
    vec = vec / np.linalg.norm(vec)
    hv = apply(vec)
    energy = float(vec @ hv)
    residual = float(np.linalg.norm(hv - energy * vec))
    if residual > 1e-6 * max(1.0, abs(energy)):
        raise ConvergenceError("ground-state eigensolver did not converge", residual)
    return energy, vec


def ground_state(op: Operator, basis: SectorBasis, kind="FCI") -> ProxyState:
    """Lowest-energy state of ``op`` at the HF, CISD, or FCI level.

    CISD is the lowest eigenvector of ``op`` projected onto determinants at most
    doubly excited from the Aufbau reference; all electrons are correlated.
    """
    kind = ProxyKind.parse(kind)
    hf = basis.unit(basis.hf_word)
    if kind is ProxyKind.HF:
        return ProxyState(basis, hf, kind, float(hf @ op.apply(hf, basis)))

    if kind is ProxyKind.FCI:
        _, vec = _lowest(lambda v: op.apply(v, basis), basis.dim, hf)
    else:
        support = np.flatnonzero(excitation_level(basis.states, basis.hf_word) <= 2)

        def apply(v):
            full = np.zeros(basis.dim)
            full[support] = v
            return op.apply(full, basis)[support]

        _, sub = _lowest(apply, len(support), hf[support])
        vec = np.zeros(basis.dim)
        vec[support] = sub
    return ProxyState(basis, vec, kind, float(vec @ op.apply(vec, basis)))


def _schur_log(u: np.ndarray) -> np.ndarray:
    # real Schur form of an orthogonal matrix: 2x2 rotation blocks and +-1 entries;
    # the -1 entries (even in number for det +1) are paired into rotations by pi
    t, q = scipy.linalg.schur(u, output="real")
    n = len(u)
    a = np.zeros((n, n))
    negative = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 1e-12:
            phi = np.arctan2(t[i + 1, i], t[i, i])
            a[i + 1, i], a[i, i + 1] = phi, -phi
            i += 2
        else:
            if t[i, i] < 0:
                negative.append(i)
            i += 1
    for j, k in zip(negative[::2], negative[1::2]):
        a[k, j], a[j, k] = np.pi, -np.pi
    return q @ a @ q.T


def _real_log(u: np.ndarray) -> np.ndarray:
    kappa = scipy.linalg.logm(u)
    if np.iscomplexobj(kappa):
        if np.max(np.abs(kappa.imag)) > 1e-8:
            # eigenvalue -1: no real principal logarithm, use a real branch instead
            kappa = _schur_log(u)
            if not np.allclose(scipy.linalg.expm(kappa), u, atol=1e-9, rtol=0):
                raise ValueError("failed to find a real logarithm of the orbital rotation")
        kappa = kappa.real
    return (kappa - kappa.T) / 2


def rotation_generator(u: np.ndarray) -> np.ndarray:
    """Antisymmetric ``theta`` with ``expm(theta) == u``.

    Raises:
        ValueError: ``u`` is not orthogonal or has determinant -1.
    """
    n = u.shape[0]
    if not np.allclose(u @ u.T, np.eye(n), atol=1e-10, rtol=0):
        raise ValueError("rotation matrix is not orthogonal")
    if np.linalg.det(u) < 0:
        raise ValueError("rotation has determinant -1; no real logarithm on the principal branch")
    return _real_log(u)


def rotate_vector(u: np.ndarray, x: np.ndarray, basis: SectorBasis) -> np.ndarray:
    theta = rotation_generator(u)
    gen = basis.one_body_sparse(theta)
    return scipy.sparse.linalg.expm_multiply(gen, x)


def rotate_state(u: np.ndarray, state: ProxyState) -> ProxyState:
    """Apply ``exp(sum_{p>q} theta_pq (E_p^q - E_q^p))`` with ``theta = log(u)``.

    The convention is such that ``U^dag n_p U = sum_ij u[p, i] u[p, j] E_i^j``.
    """
    if u.shape != (state.basis.n_modes,) * 2:
        raise ValueError("rotation does not match the number of modes")
    x = rotate_vector(u, state.amplitudes, state.basis)
    x = x / np.linalg.norm(x)
    return ProxyState(state.basis, x, state.kind, state.energy)
