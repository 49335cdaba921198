"""Pure-numpy implementations of the occupation-basis kernels.

These mirror ``_kernels.pyx`` exactly and are used when the compiled extension
is unavailable (or when ``FLUIDFRAG_PURE_PYTHON=1``).

An excitation table lists every nonzero matrix element of every ``E_p^q`` in a
fixed-particle-number sector as four parallel arrays ``(src, dst, pq, sign)``:
``E_p^q |src> = sign |dst>`` with ``pq = p * n_modes + q``.
"""

from __future__ import annotations

import numpy as np


def _between_mask(p: int, q: int) -> int:
    lo, hi = min(p, q), max(p, q)
    return ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1) if hi > lo else 0


def build_table(states: np.ndarray, n_modes: int):
    states = np.asarray(states, dtype=np.int64)
    srcs, dsts, pqs, signs = [], [], [], []
    all_idx = np.arange(len(states), dtype=np.int64)
    for q in range(n_modes):
        occ_q = (states >> q) & 1 == 1
        for p in range(n_modes):
            if p == q:
                sel = all_idx[occ_q]
                srcs.append(sel)
                dsts.append(sel)
                pqs.append(np.full(len(sel), p * n_modes + q, dtype=np.int64))
                signs.append(np.ones(len(sel)))
                continue
            mask = occ_q & ((states >> p) & 1 == 0)
            sel = all_idx[mask]
            words = states[sel]
            new = (words ^ (1 << q)) | (1 << p)
            parity = np.bitwise_count(words & _between_mask(p, q)) & 1
            srcs.append(sel)
            dsts.append(np.searchsorted(states, new).astype(np.int64))
            pqs.append(np.full(len(sel), p * n_modes + q, dtype=np.int64))
            signs.append(1.0 - 2.0 * parity)
    return (
        np.concatenate(srcs),
        np.concatenate(dsts),
        np.concatenate(pqs),
        np.concatenate(signs).astype(np.float64),
    )


def apply_one_body(t_flat, src, dst, pq, sign, x):
    dim = x.shape[0]
    w = t_flat[pq] * sign * x[src]
    return np.bincount(dst, weights=w, minlength=dim)


def excite_all(src, dst, pq, sign, x, n_pq):
    dim = x.shape[0]
    flat = np.bincount(pq * dim + dst, weights=sign * x[src], minlength=n_pq * dim)
    return flat.reshape(n_pq, dim)


def contract(src, dst, pq, sign, z):
    dim = z.shape[1]
    return np.bincount(dst, weights=sign * z[pq, src], minlength=dim)
