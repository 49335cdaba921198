"""Low-rank (double-factorized) decomposition of the two-electron tensor."""

from __future__ import annotations

import numpy as np

from .core import Fragment, FragmentKind, FragmentSet, diagonalize_one_electron, fix_row_signs, l1_norm

DEFAULT_TRUNCATION = 1e-8


def check_eightfold(g: np.ndarray, atol: float = 1e-12):
    n = g.shape[0]
    if g.shape != (n, n, n, n):
        raise ValueError(f"two-electron tensor must be (n, n, n, n), got {g.shape}")
    for axes in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
        if not np.allclose(g, g.transpose(axes), atol=atol, rtol=0):
            raise ValueError("two-electron tensor lacks 8-fold permutational symmetry")


def _sign_fix(v: np.ndarray) -> np.ndarray:
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def symmetric_pair_basis(n: int) -> np.ndarray:
    """Orthonormal basis of symmetric ``n x n`` matrices, flattened: shape ``(n*n, n(n+1)/2)``."""
    cols = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0 if i == j else np.sqrt(0.5)
            cols.append(e.ravel())
    return np.array(cols).T


def lr_fragments(g_tilde: np.ndarray, truncation_threshold: float = DEFAULT_TRUNCATION):
    """Two-electron LR fragments, one per kept eigenpair of the pair-index matrix."""
    check_eightfold(g_tilde)
    n = g_tilde.shape[0]
    mat = g_tilde.reshape(n * n, n * n)
    # ij <-> ji symmetry confines the spectrum to symmetric pair matrices
    basis = symmetric_pair_basis(n)
    sub = basis.T @ mat @ basis
    evals, evecs = np.linalg.eigh((sub + sub.T) / 2)
    pairs = [(e, _sign_fix(basis @ w)) for e, w in zip(evals, evecs.T)]
    # descending |eps|; near-ties broken lexicographically on the sign-fixed vector
    pairs.sort(key=lambda ew: (-round(abs(ew[0]), 10), tuple(-ew[1])))

    fragments = []
    for eps, w in pairs:
        if abs(eps) <= truncation_threshold:
            continue
        wmat = w.reshape(n, n)
        vals, vecs = np.linalg.eigh((wmat + wmat.T) / 2)
        u = fix_row_signs(vecs.T)
        # recompute v against the sign-fixed rows so that u.T diag(v) u == wmat
        v = np.einsum("pi,ij,pj->p", u, wmat, u)
        lam = eps * np.outer(v, v)
        eta = np.sqrt(eps) * v if eps > 0 else None
        fragments.append(
            Fragment(FragmentKind.TWO_ELECTRON, u_tilde=u, lambda_tilde=lam, rank1_factor=eta)
        )
    return fragments


def lr_decompose(
    g_tilde: np.ndarray,
    truncation_threshold: float = DEFAULT_TRUNCATION,
    h_tilde: np.ndarray | None = None,
) -> FragmentSet:
    """Diagonalize ``g_tilde`` as an ``(ij),(kl)`` matrix and factor each eigenvector.

    Each kept eigenpair ``(eps, w)`` with ``|eps| > truncation_threshold`` becomes a
    fragment ``eps (sum_ij w_ij E_ij)^2``; ``w`` is diagonalized to give the orbital
    rotation and ``lambda_tilde = eps * outer(v, v)``. Fragments are ordered by
    descending ``|eps|``.

    Args:
        g_tilde: Spatial two-electron tensor with 8-fold symmetry.
        truncation_threshold: Eigenvalues at or below this magnitude are dropped.
        h_tilde: Optional one-electron matrix for ``h0``; zero when omitted.

    Returns:
        The fragment set. ``residual_l1`` is the L1 norm of the dropped part.
    """
    n = g_tilde.shape[0]
    frags = lr_fragments(g_tilde, truncation_threshold)
    h0 = diagonalize_one_electron(np.zeros((n, n)) if h_tilde is None else h_tilde)
    fit = sum((f.two_body_tensor() for f in frags), np.zeros((n,) * 4))
    return FragmentSet(h0, tuple(frags), "LR", residual_l1=l1_norm(g_tilde - fit))
