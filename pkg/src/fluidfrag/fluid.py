"""Fluid repartitioning of one-electron weight between fragments.

Every two-electron fragment ``H_a = U_a^dag (sum_pq lam_pq n_p n_q) U_a`` contains a
one-electron part because ``n_p**2 = n_p``. Moving ``sum_p c_p O_p`` (with
``O_p = U_a^dag n_p U_a``) from ``H_a`` into ``H_0`` leaves the operator sum
unchanged but alters fragment variances. The coefficients are parameterized as
``c_p = sum_k c_k w_kp``, with one weight vector ``w_k`` per optimization variable:

``full``
    one variable per spatial orbital, ``w = e_{2i} + e_{2i+1}`` (spin-paired);
``r1``
    one variable per fragment, ``w_p = lam_pp``;
``r2``
    one variable per fragment, ``w_p = sum_q lam_pq``; ``c = 1`` is the
    reflection substitution ``n_p -> (1 - r_p) / 2``.

With measurement fractions ``m`` fixed the proxy measurement cost is a convex
quadratic in ``c`` and is minimized by one linear solve; with ``c`` fixed the
optimal ``m`` is closed form. :func:`iterate` alternates the two.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging

import numpy as np

from .fock.basis import SectorBasis
from .fock.operators import OneBodyOperator
from .fock.states import ProxyState
from .fragments.core import Fragment, FragmentKind, FragmentSet, diagonalize_one_electron

logger = logging.getLogger(__name__)

M_FLOOR = 1e-12
RANK_RTOL = 1e-12


class Variant(str, enum.Enum):
    FULL = "full"
    R1 = "r1"
    R2 = "r2"

    @classmethod
    def parse(cls, value) -> Variant:
        return value if isinstance(value, cls) else cls(str(value).lower())


def variable_weights(fragment: Fragment, variant, spin_paired: bool = True) -> np.ndarray:
    """Rows ``w_k`` (in the fragment frame, one entry per spin orbital) of the
    variables owned by ``fragment``."""
    if fragment.kind is not FragmentKind.TWO_ELECTRON:
        raise ValueError("only two-electron fragments have extractable one-electron parts")
    variant = Variant.parse(variant)
    n = fragment.n_orbitals
    lam = fragment.lambda_tilde
    if variant is Variant.FULL:
        if spin_paired:
            return np.kron(np.eye(n), np.ones((1, 2)))
        return np.eye(2 * n)
    if variant is Variant.R1:
        diag = np.diag(lam)
    else:
        # sum over spin-orbital q doubles the spatial row sum
        diag = 2 * lam.sum(axis=1)
    return np.repeat(diag, 2)[None, :]


def extracted_operator(fragment: Fragment, variant, index: int = 0, spin_paired: bool = True) -> OneBodyOperator:
    """One-body operator ``sum_p w_p U^dag n_p U`` for variable ``index`` of ``fragment``."""
    w = variable_weights(fragment, variant, spin_paired)[index]
    us = fragment.spin_rotation()
    return OneBodyOperator(us.T @ np.diag(w) @ us)


@dataclasses.dataclass(frozen=True)
class CovarianceCache:
    """Proxy covariances entering the repartitioned fragment variances.

    ``var_frag[a]`` is ``Var(H_a)`` (``a = 0`` is the one-electron fragment);
    ``cov_OO[k, l]`` is ``Cov(A_k, A_l)`` over extracted operators; ``cov_H0_O`` and
    ``cov_Ha_O`` hold symmetrized covariances ``Cov(H, A) + Cov(A, H)`` with ``H_0``
    and with the owning fragment. ``owner[k]`` is the fragment index (1-based) of
    variable ``k``; ``index_map[k] = (owner, local index)``.
    """

    var_frag: np.ndarray
    cov_OO: np.ndarray
    cov_H0_O: np.ndarray
    cov_Ha_O: np.ndarray
    variant: Variant
    index_map: tuple[tuple[int, int], ...]
    weights: tuple[np.ndarray, ...]
    spin_paired: bool = True

    @property
    def owner(self) -> np.ndarray:
        return np.array([a for a, _ in self.index_map], dtype=int)

    @property
    def n_variables(self) -> int:
        return len(self.index_map)

    @property
    def n_fragments(self) -> int:
        return len(self.var_frag) - 1

    def block(self, alpha: int) -> np.ndarray:
        return np.flatnonzero(self.owner == alpha)


def build_cache(
    fragments: FragmentSet, proxy: ProxyState, variant, spin_paired: bool = True
) -> CovarianceCache:
    """Evaluate every covariance needed to optimize ``variant`` on ``proxy``."""
    variant = Variant.parse(variant)
    basis: SectorBasis = proxy.basis
    if basis.n_modes != 2 * fragments.n_orbitals:
        raise ValueError("proxy state and fragments disagree on the number of modes")
    x = proxy.amplitudes
    frag_vecs = np.array([f.apply(x, basis) for f in fragments.all_fragments])
    frag_means = frag_vecs @ x
    var_frag = np.einsum("ad,ad->a", frag_vecs, frag_vecs) - frag_means**2

    index_map, weights, op_vecs = [], [], []
    for alpha, frag in enumerate(fragments.two_body, start=1):
        w = variable_weights(frag, variant, spin_paired)
        us = frag.spin_rotation()
        for i, wk in enumerate(w):
            index_map.append((alpha, i))
            weights.append(wk)
            op_vecs.append(basis.apply_one_body(us.T @ np.diag(wk) @ us, x))
    op_vecs = np.array(op_vecs).reshape(len(index_map), basis.dim)
    op_means = op_vecs @ x
    cov_OO = op_vecs @ op_vecs.T - np.outer(op_means, op_means)
    cov_OO = (cov_OO + cov_OO.T) / 2
    owner = np.array([a for a, _ in index_map], dtype=int)
    cov_H0_O = 2 * (op_vecs @ frag_vecs[0] - op_means * frag_means[0])
    cov_Ha_O = 2 * (
        np.einsum("kd,kd->k", op_vecs, frag_vecs[owner]) - op_means * frag_means[owner]
    ) if len(owner) else np.zeros(0)
    return CovarianceCache(
        var_frag=np.maximum(var_frag, 0.0),
        cov_OO=cov_OO,
        cov_H0_O=cov_H0_O,
        cov_Ha_O=cov_Ha_O,
        variant=variant,
        index_map=tuple(index_map),
        weights=tuple(weights),
        spin_paired=spin_paired,
    )


def repartitioned_variances(cache: CovarianceCache, c: np.ndarray) -> np.ndarray:
    """Proxy variances of every fragment after moving ``c`` (quadratic-form expansion)."""
    c = np.asarray(c, dtype=np.float64)
    v = cache.var_frag.copy()
    v[0] += c @ cache.cov_OO @ c + cache.cov_H0_O @ c
    owner = cache.owner
    for alpha in range(1, len(v)):
        k = owner == alpha
        ck = c[k]
        v[alpha] += ck @ cache.cov_OO[np.ix_(k, k)] @ ck - cache.cov_Ha_O[k] @ ck
    return v


def measurement_cost(variances: np.ndarray, m: np.ndarray) -> float:
    """``sum_a Var_a / m_a``, i.e. ``eps**2 M(eps)``."""
    return float(np.sum(np.asarray(variances) / np.asarray(m)))


def proxy_cost(cache: CovarianceCache, c: np.ndarray, m: np.ndarray) -> float:
    return measurement_cost(np.maximum(repartitioned_variances(cache, c), 0.0), m)


def allocate(variances: np.ndarray) -> np.ndarray:
    """Optimal measurement fractions ``m_a = sqrt(Var_a) / sum_b sqrt(Var_b)``.

    Zero-variance fragments get a floor of ``1e-12`` before renormalization; if
    every variance vanishes the allocation is uniform.
    """
    v = np.asarray(variances, dtype=np.float64)
    if np.any(v < -1e-12):
        raise ValueError("variances must be non-negative")
    s = np.sqrt(np.maximum(v, 0.0))
    if not np.any(s > 0):
        return np.full(len(v), 1.0 / len(v))
    m = s / s.sum()
    m = np.maximum(m, M_FLOOR)
    return m / m.sum()


def linear_system(cache: CovarianceCache, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stationarity system ``A c = rhs`` of the proxy cost at fixed ``m``."""
    m = np.asarray(m, dtype=np.float64)
    owner = cache.owner
    inv_m = 1.0 / m[owner]
    same = owner[:, None] == owner[None, :]
    a = 2 * (cache.cov_OO / m[0] + np.where(same, cache.cov_OO, 0.0) * inv_m[:, None])
    rhs = cache.cov_Ha_O * inv_m - cache.cov_H0_O / m[0]
    return (a + a.T) / 2, rhs


def stationarity_residual(cache: CovarianceCache, m: np.ndarray, c: np.ndarray) -> float:
    a, rhs = linear_system(cache, m)
    return float(np.linalg.norm(a @ c - rhs))


def _solve(cache: CovarianceCache, m: np.ndarray) -> tuple[np.ndarray, bool]:
    m = np.asarray(m, dtype=np.float64)
    if np.any(m <= 0) or abs(m.sum() - 1) > 1e-9:
        raise ValueError("m must be a strictly positive simplex vector")
    if cache.n_variables == 0:
        return np.zeros(0), False
    a, rhs = linear_system(cache, m)
    # rank-revealing eigen-solve; the spin-summed number operator makes ``a``
    # singular for the full variant, and those directions get zero weight
    vals, vecs = np.linalg.eigh(a)
    cut = RANK_RTOL * max(np.max(np.abs(vals)), 1e-300)
    keep = np.abs(vals) > cut
    c = vecs[:, keep] @ ((vecs[:, keep].T @ rhs) / vals[keep])
    return c, bool(np.any(~keep))


def solve_c(cache: CovarianceCache, m: np.ndarray) -> np.ndarray:
    """Coefficients minimizing the proxy cost at fixed ``m`` (least-norm if singular)."""
    return _solve(cache, m)[0]


@dataclasses.dataclass(frozen=True)
class RepartitionSolution:
    variant: Variant
    c: np.ndarray
    m: np.ndarray
    predicted_eps2M: float
    iterations: int
    converged: bool
    history: tuple[float, ...] = ()
    rank_deficient: bool = False
    spin_paired: bool = True

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if np.any(m <= 0) or abs(m.sum() - 1) > 1e-9:
            raise ValueError("m must be a strictly positive simplex vector")
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=np.float64))
        object.__setattr__(self, "m", m)

    @property
    def n_c(self) -> int:
        return len(self.c)

    def to_dict(self) -> dict:
        return {
            "format": "fluidfrag.solution/1",
            "variant": self.variant.value,
            "spin_paired": self.spin_paired,
            "c": self.c.tolist(),
            "m": self.m.tolist(),
            "predicted_eps2M": self.predicted_eps2M,
            "iterations": self.iterations,
            "converged": self.converged,
            "rank_deficient": self.rank_deficient,
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RepartitionSolution:
        return cls(
            variant=d["variant"],
            c=np.array(d["c"], dtype=np.float64),
            m=np.array(d["m"], dtype=np.float64),
            predicted_eps2M=float(d["predicted_eps2M"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            history=tuple(d.get("history", ())),
            rank_deficient=bool(d.get("rank_deficient", False)),
            spin_paired=bool(d.get("spin_paired", True)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> RepartitionSolution:
        return cls.from_dict(json.loads(text))


def iterate(
    cache_or_fragments,
    proxy: ProxyState | None = None,
    variant=None,
    tol: float = 1e-6,
    max_iter: int = 50,
) -> RepartitionSolution:
    """Alternate exact ``c``-minimization and optimal re-allocation of ``m``.

    Starts from ``c = 0`` and the optimal ``m`` for the initial variances, so the
    first cost is that of the unmodified fragments. Pass either a prebuilt
    :class:`CovarianceCache` or ``(fragments, proxy, variant)``.

    Every half-step is an exact minimization of a convex sub-problem, so the
    recorded proxy cost ``history`` is non-increasing. Stops when the relative change
    over one full iteration drops below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(cache_or_fragments, CovarianceCache):
        cache = cache_or_fragments
    else:
        cache = build_cache(cache_or_fragments, proxy, variant)

    c = np.zeros(cache.n_variables)
    m = allocate(cache.var_frag)
    cost = proxy_cost(cache, c, m)
    history = [cost]
    converged = False
    rank_deficient = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        c, singular = _solve(cache, m)
        rank_deficient |= singular
        history.append(proxy_cost(cache, c, m))
        m = allocate(np.maximum(repartitioned_variances(cache, c), 0.0))
        new_cost = proxy_cost(cache, c, m)
        history.append(new_cost)
        change = abs(cost - new_cost) / max(abs(cost), 1e-300)
        cost = new_cost
        logger.debug("iteration %d: proxy eps2M %.8g", iterations, cost)
        if change < tol:
            converged = True
            break
    return RepartitionSolution(
        variant=cache.variant,
        c=c,
        m=m,
        predicted_eps2M=cost,
        iterations=iterations,
        converged=converged,
        history=tuple(history),
        rank_deficient=rank_deficient,
        spin_paired=cache.spin_paired,
    )


def apply_repartition(fragments: FragmentSet, c: np.ndarray, variant, spin_paired: bool = True) -> FragmentSet:
    """Move ``c``-weighted one-electron parts from two-electron fragments into ``h0``.

    The one-electron fragment is re-diagonalized; the operator sum is unchanged.
    """
    variant = Variant.parse(variant)
    c = np.asarray(c, dtype=np.float64)
    weights = [variable_weights(f, variant, spin_paired) for f in fragments.two_body]
    expected = sum(len(w) for w in weights)
    if c.shape != (expected,):
        raise ValueError(f"expected {expected} coefficients for variant {variant.value}, got {c.shape}")
    if not np.any(c):
        return fragments
    if not spin_paired:
        raise ValueError("repartitioning into a spin-restricted h0 requires spin-paired coefficients")

    n = fragments.n_orbitals
    h = fragments.h0.spatial_one_body()
    new_two = []
    pos = 0
    for frag, w in zip(fragments.two_body, weights):
        ck = c[pos : pos + len(w)]
        pos += len(w)
        if not np.any(ck):
            new_two.append(frag)
            continue
        shift = ck @ w
        h = h + frag.u_tilde.T @ np.diag(shift[0::2]) @ frag.u_tilde
        new_two.append(frag.replace(linear=frag.linear_part() - shift))
    h0 = diagonalize_one_electron((h + h.T) / 2).replace(offset=fragments.h0.offset)
    return FragmentSet(h0, tuple(new_two), fragments.source, fragments.residual_l1)


def n_variables(fragments: FragmentSet, variant, spin_paired: bool = True) -> int:
    """``N_c``: ``N_f * N/2`` for ``full`` (spin-paired), ``N_f`` for ``r1``/``r2``."""
    return sum(len(variable_weights(f, variant, spin_paired)) for f in fragments.two_body)


def reflection_fragment(fragment: Fragment) -> Fragment:
    """Reflection form ``sum_pq lam_pq / 4 r_p r_q`` of a two-electron fragment, with
    ``r_p = 1 - 2 n_p``, expressed through occupation numbers."""
    lam_spin = fragment.spin_lambda()
    row = lam_spin.sum(axis=1)
    return fragment.replace(
        linear=fragment.linear_part() - row,
        offset=fragment.offset + lam_spin.sum() / 4,
    )


__all__ = [
    "CovarianceCache",
    "RepartitionSolution",
    "Variant",
    "allocate",
    "apply_repartition",
    "build_cache",
    "extracted_operator",
    "iterate",
    "linear_system",
    "measurement_cost",
    "n_variables",
    "proxy_cost",
    "reflection_fragment",
    "repartitioned_variances",
    "solve_c",
    "stationarity_residual",
    "variable_weights",
]
