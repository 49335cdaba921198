"""Greedy full-rank optimization (GFRO) of two-electron fragments.

At each step a single fragment
``F_ijkl = sum_pq lambda_pq u_pi u_pj u_qk u_ql`` with ``u = expm(theta)`` is fit
to the current residual tensor and subtracted. Under the Frobenius cost the
rotated tensors ``outer(u_p, u_p) (x) outer(u_q, u_q)`` are orthonormal, so the
optimal ``lambda`` at fixed ``u`` is a projection and only ``theta`` is searched.
The ``l1_smoothed`` cost then refines ``(theta, lambda)`` jointly.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.linalg
import scipy.optimize

from .core import Fragment, FragmentKind, FragmentSet, diagonalize_one_electron, l1_norm
from .lr import check_eightfold

logger = logging.getLogger(__name__)

DEFAULT_TERMINATION = 1e-5


class GFROStagnationError(RuntimeError):
    def __init__(self, message: str, residual_l1: float, n_fragments: int):
        super().__init__(f"{message}: residual L1 {residual_l1:.3e} after {n_fragments} fragments")
        self.residual_l1 = residual_l1
        self.n_fragments = n_fragments


@dataclasses.dataclass(frozen=True)
class GFROConfig:
    cost: str = "frobenius"
    n_restarts: int = 5
    seed: int = 0
    max_fragments: int = 400
    restart_scale: float = np.pi
    smoothing: float = 1e-6
    maxiter: int = 2000

    def __post_init__(self):
        if self.cost not in ("frobenius", "l1_smoothed"):
            raise ValueError(f"unknown GFRO cost {self.cost!r}")


def _generator(theta: np.ndarray, n: int) -> np.ndarray:
    a = np.zeros((n, n))
    a[np.tril_indices(n, -1)] = theta
    return a - a.T


def _basis_generators(n: int) -> list[np.ndarray]:
    out = []
    for i, j in zip(*np.tril_indices(n, -1)):
        e = np.zeros((n, n))
        e[i, j], e[j, i] = 1.0, -1.0
        out.append(e)
    return out


def project_lambda(g: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Frobenius-optimal ``lambda`` for fixed rotation ``u``."""
    return np.einsum("ijkl,pi,pj,qk,ql->pq", g, u, u, u, u, optimize=True)


def fit_tensor(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("pq,pi,pj,qk,ql->ijkl", lam, u, u, u, u, optimize=True)


def _du_contract(w: np.ndarray, lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    # sum_q lam_aq sum_jkl w_bjkl u_aj u_qk u_ql, returned as [a, b]
    t = np.einsum("bjkl,aj,qk,ql->baq", w, u, u, u, optimize=True)
    return np.einsum("aq,baq->ab", lam, t)


def _chain_theta(a: np.ndarray, du: np.ndarray, gens) -> np.ndarray:
    return np.array([np.sum(du * scipy.linalg.expm_frechet(a, e, compute_expm=False)) for e in gens])


class _Frobenius:
    """``f(theta) = -||project_lambda(g, expm(theta))||^2`` (the residual norm minus a constant)."""

    def __init__(self, g):
        self.g = g
        self.n = g.shape[0]
        self.gens = _basis_generators(self.n)

    def __call__(self, theta):
        a = _generator(theta, self.n)
        u = scipy.linalg.expm(a)
        lam = project_lambda(self.g, u)
        du = 8 * _du_contract(self.g, lam, u)
        return -float(np.sum(lam**2)), -_chain_theta(a, du, self.gens)


class _SmoothL1:
    """Smoothed L1 norm of ``g - fit(lambda, expm(theta))``."""

    def __init__(self, g, delta):
        self.g = g
        self.n = g.shape[0]
        self.delta = delta
        self.gens = _basis_generators(self.n)
        self.tri = np.triu_indices(self.n)

    def unpack(self, x):
        m = len(self.gens)
        lam = np.zeros((self.n, self.n))
        lam[self.tri] = x[m:]
        return x[:m], lam + np.triu(lam, 1).T

    def __call__(self, x):
        theta, lam = self.unpack(x)
        a = _generator(theta, self.n)
        u = scipy.linalg.expm(a)
        r = self.g - fit_tensor(lam, u)
        root = np.sqrt(r**2 + self.delta**2)
        w = r / root
        glam_full = -project_lambda(w, u)
        glam = 2 * glam_full - np.diag(np.diag(glam_full))
        du = -4 * _du_contract(w, lam, u)
        grad = np.concatenate([_chain_theta(a, du, self.gens), glam[self.tri]])
        return float(np.sum(root - self.delta)), grad


def fit_fragment(
    residual: np.ndarray, config: GFROConfig, rng: np.random.Generator, cost_name: str | None = None
):
    """Best single full-rank fragment for ``residual`` over zero plus random starts."""
    cost_name = cost_name or config.cost
    n = residual.shape[0]
    m = n * (n - 1) // 2
    cost = _Frobenius(residual)
    starts = [np.zeros(m)] + [
        rng.uniform(-config.restart_scale, config.restart_scale, m) for _ in range(config.n_restarts)
    ]
    best = None
    for x0 in starts:
        if m == 0:
            theta = np.zeros(0)
            val = cost(theta)[0]
        else:
            res = scipy.optimize.minimize(
                cost, x0, jac=True, method="BFGS", options={"maxiter": config.maxiter, "gtol": 1e-12}
            )
            theta, val = res.x, float(res.fun)
        if best is None or val < best[1] - 1e-15:
            best = (theta, val)
    theta = best[0]
    u = scipy.linalg.expm(_generator(theta, n))
    lam = project_lambda(residual, u)

    if cost_name == "l1_smoothed":
        smooth = _SmoothL1(residual, config.smoothing)
        x0 = np.concatenate([theta, lam[smooth.tri]])
        res = scipy.optimize.minimize(smooth, x0, jac=True, method="L-BFGS-B", options={"maxiter": config.maxiter})
        if res.fun < smooth(x0)[0]:
            theta, lam = smooth.unpack(res.x)
            u = scipy.linalg.expm(_generator(theta, n))
    lam = (lam + lam.T) / 2
    return Fragment(FragmentKind.TWO_ELECTRON, u_tilde=u, lambda_tilde=lam)


def gfro_decompose(
    g_tilde: np.ndarray,
    termination_threshold: float = DEFAULT_TERMINATION,
    config: GFROConfig | None = None,
    h_tilde: np.ndarray | None = None,
    history: list | None = None,
) -> FragmentSet:
    """Greedily peel full-rank fragments off ``g_tilde``.

    Iteration stops once the L1 norm of the residual tensor drops below
    ``termination_threshold``.

    Raises:
        GFROStagnationError: A step fails to lower the residual (relative change
            below 1e-12) or ``config.max_fragments`` is exceeded.
    """
    config = config or GFROConfig()
    check_eightfold(g_tilde)
    n = g_tilde.shape[0]
    rng = np.random.default_rng(config.seed)
    residual = np.array(g_tilde, dtype=np.float64)
    frags = []
    l1 = l1_norm(residual)
    if history is not None:
        history.append(l1)
    while l1 >= termination_threshold:
        if len(frags) >= config.max_fragments:
            raise GFROStagnationError("GFRO exceeded max_fragments", l1, len(frags))
        frag = fit_fragment(residual, config, rng)
        new_residual = residual - frag.two_body_tensor()
        new_l1 = l1_norm(new_residual)
        if new_l1 >= l1 and config.cost == "frobenius":
            # Frobenius step raised the L1 norm; refine this step on the L1 cost
            frag = fit_fragment(residual, config, rng, cost_name="l1_smoothed")
            new_residual = residual - frag.two_body_tensor()
            new_l1 = l1_norm(new_residual)
        frob_old, frob_new = np.sum(residual**2), np.sum(new_residual**2)
        if frob_old - frob_new <= 1e-12 * frob_old or new_l1 >= l1:
            raise GFROStagnationError("GFRO step did not lower the residual", l1, len(frags))
        frags.append(frag)
        residual, l1 = new_residual, new_l1
        if history is not None:
            history.append(l1)
        logger.debug("GFRO fragment %d: residual L1 %.3e", len(frags), l1)

    h0 = diagonalize_one_electron(np.zeros((n, n)) if h_tilde is None else h_tilde)
    return FragmentSet(h0, tuple(frags), "GFRO", residual_l1=l1)
