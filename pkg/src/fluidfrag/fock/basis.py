"""Fixed-electron-number occupation basis."""

from __future__ import annotations

import functools
import itertools
from math import comb

import numpy as np

from . import kernels


class SectorBasis:
    """All ``n_modes``-bit occupation words with ``n_electrons`` bits set.

    Bit ``p`` of a word is the occupation of spin orbital ``p``. Words are kept
    in increasing integer order, and the excitation table for ``E_p^q`` is built
    lazily on first use and shared by every operator acting on this basis.
    """

    def __init__(self, n_modes: int, n_electrons: int):
        if not 0 <= n_electrons <= n_modes:
            raise ValueError(f"cannot place {n_electrons} electrons in {n_modes} modes")
        if n_modes > 62:
            raise ValueError("at most 62 modes are supported")
        self.n_modes = n_modes
        self.n_electrons = n_electrons
        words = [
            sum(1 << p for p in occ)
            for occ in itertools.combinations(range(n_modes), n_electrons)
        ]
        self.states = np.array(sorted(words), dtype=np.int64)
        self.states.setflags(write=False)
        assert len(self.states) == comb(n_modes, n_electrons)

    def __len__(self) -> int:
        return len(self.states)

    def __repr__(self) -> str:
        return f"SectorBasis(n_modes={self.n_modes}, n_electrons={self.n_electrons})"

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, word: int) -> int:
        i = int(np.searchsorted(self.states, word))
        if i >= len(self.states) or self.states[i] != word:
            raise KeyError(f"word {word:#b} is not in this sector")
        return i

    @property
    def hf_word(self) -> int:
        """Aufbau filling of the lowest ``n_electrons`` modes."""
        return (1 << self.n_electrons) - 1

    @functools.cached_property
    def table(self):
        tab = kernels.build_table(self.states, self.n_modes)
        for a in tab:
            a.setflags(write=False)
        return tab

    @functools.cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, n_modes)`` 0/1 matrix of mode occupations."""
        bits = (self.states[:, None] >> np.arange(self.n_modes)) & 1
        return bits.astype(np.float64)

    def _check(self, x: np.ndarray):
        if x.shape[0] != self.dim:
            raise ValueError(f"vector of length {x.shape[0]} does not match sector dim {self.dim}")

    def apply_one_body(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        """``sum_pq t[p, q] E_p^q x``."""
        n = self.n_modes
        if t.shape != (n, n):
            raise ValueError(f"one-body matrix of shape {t.shape} does not match {n} modes")
        self._check(x)
        return kernels.apply_one_body(np.ascontiguousarray(t).ravel(), *self.table, x)

    def excite_all(self, x: np.ndarray) -> np.ndarray:
        """Stack of ``E_p^q x`` for every ``(p, q)``, shape ``(n_modes**2, dim)``."""
        self._check(x)
        return kernels.excite_all(*self.table, x, self.n_modes**2)

    def contract(self, z: np.ndarray) -> np.ndarray:
        """``sum_pq E_p^q z[pq]`` for a stack ``z`` of shape ``(n_modes**2, dim)``."""
        return kernels.contract(*self.table, np.ascontiguousarray(z))

    def unit(self, word: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index_of(word)] = 1.0
        return v

    def one_body_sparse(self, t: np.ndarray):
        """``sum_pq t[p, q] E_p^q`` as a ``scipy.sparse`` CSR matrix on this sector."""
        import scipy.sparse

        src, dst, pq, sign = self.table
        data = np.ascontiguousarray(t).ravel()[pq] * sign
        keep = data != 0
        return scipy.sparse.csr_matrix(
            (data[keep], (dst[keep], src[keep])), shape=(self.dim, self.dim)
        )
