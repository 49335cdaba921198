"""Measurement-cost reports, LCU 1-norm bounds, and a shot-noise simulator."""

from __future__ import annotations

import dataclasses
import io
import math
import warnings
from typing import Sequence

import numpy as np

from .fock.operators import variance
from .fock.states import ProxyKind, ProxyState, rotate_vector
from .fragments.core import Fragment, FragmentKind, FragmentSet
from .tensors import spin_expand_matrix


def _fmt(x: float) -> str:
    return f"{x:.5e}"


@dataclasses.dataclass(frozen=True)
class MeasurementReport:
    """Exact per-fragment variances and the resulting ``eps**2 M(eps)``."""

    variances: np.ndarray
    m: np.ndarray
    contributions: np.ndarray
    eps2M: float
    eps2M_opt: float
    predicted_eps2M: float | None = None
    metadata: dict = dataclasses.field(default_factory=dict)
    proxy_gap: float | None = None
    """Relative excess of the exact cost over the proxy prediction (NaN without one)."""

    def __post_init__(self):
        if self.proxy_gap is None:
            gap = math.nan
            if self.predicted_eps2M is not None:
                gap = (self.eps2M - self.predicted_eps2M) / self.predicted_eps2M
            object.__setattr__(self, "proxy_gap", gap)

    def to_tsv(self) -> str:
        out = io.StringIO()
        for key, value in sorted(self.metadata.items()):
            out.write(f"# {key}={value}\n")
        out.write("fragment_index\tvariance\tm\tcontribution\n")
        for i, (v, m, c) in enumerate(zip(self.variances, self.m, self.contributions)):
            out.write(f"{i}\t{_fmt(v)}\t{_fmt(m)}\t{_fmt(c)}\n")
        out.write(f"eps2M\t{_fmt(self.eps2M)}\n")
        out.write(f"eps2M_opt\t{_fmt(self.eps2M_opt)}\n")
        if self.predicted_eps2M is not None:
            out.write(f"predicted_eps2M\t{_fmt(self.predicted_eps2M)}\n")
        out.write(f"proxy_gap\t{_fmt(self.proxy_gap)}\n")
        return out.getvalue()

    @classmethod
    def from_tsv(cls, text: str) -> MeasurementReport:
        meta, rows, summary = {}, [], {}
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
                continue
            parts = line.split("\t")
            if parts[0] == "fragment_index":
                continue
            if parts[0].isdigit():
                rows.append([float(x) for x in parts[1:4]])
            else:
                summary[parts[0]] = float(parts[1])
        rows = np.array(rows)
        eps2M = summary["eps2M"]
        gap = summary.get("proxy_gap", math.nan)
        predicted = summary.get("predicted_eps2M")
        return cls(
            variances=rows[:, 0],
            m=rows[:, 1],
            contributions=rows[:, 2],
            eps2M=eps2M,
            eps2M_opt=summary["eps2M_opt"],
            predicted_eps2M=predicted,
            metadata=meta,
            proxy_gap=gap,
        )


def optimal_cost(variances: Sequence[float]) -> float:
    """``(sum_a sqrt(Var_a))**2``, the cost under the optimal allocation."""
    return float(np.sum(np.sqrt(np.maximum(variances, 0.0))) ** 2)


def fragment_variances(fragments: FragmentSet, psi: ProxyState) -> np.ndarray:
    if psi.basis.n_modes != 2 * fragments.n_orbitals:
        raise ValueError("state sector does not match the fragment set")
    return np.array([variance(f, psi) for f in fragments.all_fragments])


def exact_report(
    fragments: FragmentSet,
    m: np.ndarray | None,
    psi: ProxyState,
    predicted_eps2M: float | None = None,
    **metadata,
) -> MeasurementReport:
    """Evaluate ``sum_a Var_psi(H_a) / m_a`` with exact variances on ``psi``.

    ``m=None`` selects the optimal allocation for the exact variances.
    """
    from .fluid import allocate

    if psi.kind is not ProxyKind.FCI:
        warnings.warn(f"exact report evaluated on a {psi.kind.value} state", stacklevel=2)
    var = fragment_variances(fragments, psi)
    m = allocate(var) if m is None else np.asarray(m, dtype=np.float64)
    if m.shape != var.shape:
        raise ValueError(f"allocation has {len(m)} entries for {len(var)} fragments")
    if np.any(m < 0) or abs(m.sum() - 1) > 1e-9:
        raise ValueError("m must lie on the probability simplex")
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(var > 0, var / m, 0.0)
    metadata.setdefault("state", psi.kind.value)
    return MeasurementReport(
        variances=var,
        m=m,
        contributions=contrib,
        eps2M=float(contrib.sum()),
        eps2M_opt=optimal_cost(var),
        predicted_eps2M=predicted_eps2M,
        metadata=dict(metadata),
    )


def lcu_l1_bound(fragment: Fragment) -> float:
    """1-norm of the reflection-form LCU of a fragment, identity excluded.

    With ``n_p = (1 - r_p) / 2`` the fragment ``sum_pq lam_pq n_p n_q`` (linear terms
    on the diagonal) becomes ``sum_{p != q} lam_pq / 4 r_p r_q - sum_p b_p r_p + const``
    with ``b_p = (lam_pp + sum_{q != p} lam_pq) / 2``.
    """
    if fragment.kind is not FragmentKind.TWO_ELECTRON:
        raise ValueError("the LCU bound is defined for two-electron fragments")
    lam = fragment.spin_lambda()
    off = lam - np.diag(np.diag(lam))
    b = (np.diag(lam) + off.sum(axis=1)) / 2
    return float(np.abs(off).sum() / 4 + np.abs(b).sum())


def all_occupations(n_modes: int) -> np.ndarray:
    words = np.arange(2**n_modes, dtype=np.int64)
    return ((words[:, None] >> np.arange(n_modes)) & 1).astype(np.float64)


def half_spectral_range(fragment: Fragment) -> float:
    """``(E_max - E_min) / 2`` over the whole Fock space by exhaustive enumeration."""
    if fragment.n_modes > 24:
        raise ValueError("exhaustive enumeration limited to 24 modes")
    vals = fragment.diagonal_values(all_occupations(fragment.n_modes))
    return float((vals.max() - vals.min()) / 2)


def round_shots(m: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of ``total * m``; every fragment gets at least one shot."""
    raw = np.asarray(m, dtype=np.float64) * total
    shots = np.floor(raw).astype(np.int64)
    short = total - shots.sum()
    if short > 0:
        order = np.argsort(-(raw - shots), kind="stable")
        shots[order[:short]] += 1
    return np.maximum(shots, 1)


def _proper_rotation(u: np.ndarray) -> np.ndarray:
    # flipping one row leaves every outer(u_i, u_i) and hence the fragment unchanged
    if np.linalg.det(u) < 0:
        u = u.copy()
        u[-1] *= -1
    return u


@dataclasses.dataclass(frozen=True)
class ShotRun:
    seed: int
    total_shots: int
    shots: np.ndarray
    estimate: float
    reference: float
    fragment_means: np.ndarray
    sample_variances: np.ndarray
    warnings: tuple[str, ...] = ()


class ShotSimulator:
    """Sample fragment measurements on ``psi``.

    For each fragment the state is rotated into the fragment frame once; each run
    then draws occupation words from ``|amplitude|**2`` and averages the diagonal
    polynomial of the fragment.
    """

    def __init__(self, fragments: FragmentSet, psi: ProxyState):
        basis = psi.basis
        if basis.n_modes != 2 * fragments.n_orbitals:
            raise ValueError("state sector does not match the fragment set")
        self.fragments = fragments
        self.psi = psi
        occ = basis.occupations
        self.probs, self.values = [], []
        for frag in fragments.all_fragments:
            u = spin_expand_matrix(_proper_rotation(frag.u_tilde))
            if np.allclose(u, np.eye(len(u)), atol=1e-14, rtol=0):
                x = psi.amplitudes
            else:
                x = rotate_vector(u, psi.amplitudes, basis)
            p = x**2
            self.probs.append(p / p.sum())
            self.values.append(frag.diagonal_values(occ))
        self.exact_means = np.array([p @ v for p, v in zip(self.probs, self.values)])
        self.exact_variances = np.array(
            [p @ v**2 - (p @ v) ** 2 for p, v in zip(self.probs, self.values)]
        )
        self.reference = float(self.exact_means.sum())

    def run(self, m: np.ndarray, total_shots: int, seed: int) -> ShotRun:
        if total_shots < 1:
            raise ValueError("total_shots must be positive")
        m = np.asarray(m, dtype=np.float64)
        if len(m) != len(self.probs):
            raise ValueError("allocation does not match the number of fragments")
        notes = []
        for a, (ma, va) in enumerate(zip(m, self.exact_variances)):
            if ma <= 0 and va > 1e-14:
                notes.append(f"fragment {a} has zero allocation but variance {va:.3e}")
        shots = round_shots(m, total_shots)
        streams = np.random.SeedSequence(seed).spawn(len(self.probs))
        means = np.empty(len(self.probs))
        svars = np.empty(len(self.probs))
        for a, (p, v, n, ss) in enumerate(zip(self.probs, self.values, shots, streams)):
            rng = np.random.Generator(np.random.Philox(ss))
            hist = rng.multinomial(n, p)
            mean = hist @ v / n
            means[a] = mean
            svars[a] = (hist @ (v - mean) ** 2) / (n - 1) if n > 1 else 0.0
        return ShotRun(
            seed=seed,
            total_shots=total_shots,
            shots=shots,
            estimate=float(means.sum()),
            reference=self.reference,
            fragment_means=means,
            sample_variances=svars,
            warnings=tuple(notes),
        )


def simulate_shots(
    fragments: FragmentSet, m: np.ndarray, total_shots: int, psi: ProxyState, seed: int
) -> ShotRun:
    return ShotSimulator(fragments, psi).run(m, total_shots, seed)


def predicted_estimator_variance(shots: np.ndarray, variances: np.ndarray) -> float:
    """``sum_a Var_a / M_a`` for integer shot counts."""
    return float(np.sum(np.asarray(variances) / np.asarray(shots)))


__all__ = [
    "MeasurementReport",
    "ShotRun",
    "ShotSimulator",
    "all_occupations",
    "exact_report",
    "fragment_variances",
    "half_spectral_range",
    "lcu_l1_bound",
    "optimal_cost",
    "predicted_estimator_variance",
    "round_shots",
    "simulate_shots",
]
