"""Electron-integral ingestion and spin-orbital expansion.

Integrals are read from FCIDUMP files in chemists' notation ``(ij|kl)`` and
converted to the spin-summed form

.. math::

    H = \\sum_{ij\\sigma} \\tilde h_{ij} E_{i\\sigma}^{j\\sigma}
        + \\sum_{ijkl\\sigma\\tau} \\tilde g_{ijkl}
          E_{i\\sigma}^{j\\sigma} E_{k\\tau}^{l\\tau},

with ``g_tilde = eri / 2`` and ``h_tilde = core_h - einsum('ikkj', g_tilde)``.

Spin orbitals are interleaved: spatial orbital ``i`` maps to modes ``2i`` (alpha)
and ``2i + 1`` (beta).
"""

from __future__ import annotations

import dataclasses
import io
import itertools
import os
import re
from typing import TextIO

import numpy as np

SYMMETRY_ATOL = 1e-12
CONFLICT_ATOL = 1e-10


class FCIDUMPError(ValueError):
    """Raised for malformed FCIDUMP input."""


@dataclasses.dataclass(frozen=True)
class RawIntegrals:
    """Integrals exactly as stored in an FCIDUMP file (Hartree)."""

    n_orbitals: int
    n_electrons: int
    core_h: np.ndarray
    eri: np.ndarray
    e_nuc: float = 0.0
    ms2: int = 0

    def __post_init__(self):
        validate_symmetry(self.core_h, self.eri)


@dataclasses.dataclass(frozen=True)
class SpatialTensors:
    """Spin-summed chemist-notation tensors ``h_tilde`` and ``g_tilde``."""

    h_tilde: np.ndarray
    g_tilde: np.ndarray
    e_nuc: float = 0.0
    n_electrons: int = 0

    @property
    def n_orbitals(self) -> int:
        return self.h_tilde.shape[0]


@dataclasses.dataclass(frozen=True)
class SpinTensors:
    """Spin-orbital tensors ``h_pq`` and ``g_pqrs`` over ``N = 2 * n_orbitals`` modes."""

    h: np.ndarray
    g: np.ndarray
    e_nuc: float = 0.0

    @property
    def n_modes(self) -> int:
        return self.h.shape[0]


def symmetry_residuals(core_h: np.ndarray, eri: np.ndarray) -> dict[str, float]:
    """Max-abs deviations from one-body symmetry and 8-fold ERI symmetry."""
    res = {"h": float(np.max(np.abs(core_h - core_h.T), initial=0.0))}
    perms = {
        "ij": (1, 0, 2, 3),
        "kl": (0, 1, 3, 2),
        "pair": (2, 3, 0, 1),
    }
    for name, axes in perms.items():
        res[f"eri_{name}"] = float(
            np.max(np.abs(eri - eri.transpose(axes)), initial=0.0)
        )
    return res


def validate_symmetry(core_h: np.ndarray, eri: np.ndarray, atol: float = SYMMETRY_ATOL):
    n = core_h.shape[0]
    if core_h.shape != (n, n) or eri.shape != (n, n, n, n):
        raise ValueError(
            f"inconsistent shapes: core_h {core_h.shape}, eri {eri.shape}"
        )
    bad = {k: v for k, v in symmetry_residuals(core_h, eri).items() if v > atol}
    if bad:
        raise ValueError(f"integrals violate permutational symmetry: {bad}")


_HEADER_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _parse_header(header: str, first_line: int) -> dict[str, str]:
    body = re.sub(r"&FCI", "", header, count=1, flags=re.IGNORECASE)
    body = re.sub(r"(&END|/)\s*$", "", body.strip(), flags=re.IGNORECASE)
    body = " ".join(body.split())
    keys = list(_HEADER_KEY.finditer(body))
    fields = {}
    for n, m in enumerate(keys):
        stop = keys[n + 1].start() if n + 1 < len(keys) else len(body)
        fields[m.group(1).upper()] = body[m.end() : stop].strip().strip(",").strip()
    for key in ("NORB", "NELEC"):
        if key not in fields:
            raise FCIDUMPError(f"line {first_line}: header is missing {key}")
        try:
            int(fields[key])
        except ValueError:
            raise FCIDUMPError(
                f"line {first_line}: header field {key}={fields[key]!r} is not an integer"
            ) from None
    return fields


def _eri_slots(i: int, j: int, k: int, l: int):
    return {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }


def parse_fcidump(text: str | TextIO) -> RawIntegrals:
    """Parse an FCIDUMP document.

    Args:
        text: The file contents, or an open text stream.

    Returns:
        The integrals with every symmetry-equivalent ERI slot filled.

    Raises:
        FCIDUMPError: Malformed header or body line, index out of ``[0, NORB]``,
            or two lines assigning inconsistent values to the same slot.
    """
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()

    header_end = None
    for n, line in enumerate(lines):
        if re.search(r"(&END|^\s*/\s*$)", line, flags=re.IGNORECASE):
            header_end = n
            break
    if header_end is None or not re.match(r"\s*&FCI", "\n".join(lines), re.IGNORECASE):
        raise FCIDUMPError("line 1: missing '&FCI ... &END' namelist header")
    fields = _parse_header("\n".join(lines[: header_end + 1]), 1)
    norb = int(fields["NORB"])
    nelec = int(fields["NELEC"])
    ms2 = int(fields.get("MS2", "0") or 0)
    if norb < 1 or nelec < 0 or nelec > 2 * norb:
        raise FCIDUMPError(f"line 1: unphysical header NORB={norb}, NELEC={nelec}")

    core_h = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    seen_h: dict[tuple[int, int], float] = {}
    seen_g: dict[tuple[int, int, int, int], float] = {}
    e_nuc = None

    for lineno, line in enumerate(lines[header_end + 1 :], start=header_end + 2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FCIDUMPError(f"line {lineno}: expected 'value i j k l', got {line!r}")
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError:
            raise FCIDUMPError(f"line {lineno}: cannot parse {line!r}") from None
        if any(x < 0 or x > norb for x in (i, j, k, l)):
            raise FCIDUMPError(
                f"line {lineno}: index out of range [0, {norb}] in {line!r}"
            )

        if i == j == k == l == 0:
            if e_nuc is not None and abs(e_nuc - value) > CONFLICT_ATOL:
                raise FCIDUMPError(f"line {lineno}: conflicting core energy")
            e_nuc = value
        elif k == l == 0 and i > 0 and j > 0:
            key = (min(i, j) - 1, max(i, j) - 1)
            if key in seen_h and abs(seen_h[key] - value) > CONFLICT_ATOL:
                raise FCIDUMPError(f"line {lineno}: conflicting one-body entry {i} {j}")
            seen_h[key] = value
            core_h[key] = core_h[key[::-1]] = value
        elif j == k == l == 0:
            # orbital energy line; not needed
            continue
        elif min(i, j, k, l) > 0:
            slots = _eri_slots(i - 1, j - 1, k - 1, l - 1)
            key = min(slots)
            if key in seen_g and abs(seen_g[key] - value) > CONFLICT_ATOL:
                raise FCIDUMPError(
                    f"line {lineno}: conflicting two-body entry {i} {j} {k} {l}"
                )
            seen_g[key] = value
            for s in slots:
                eri[s] = value
        else:
            raise FCIDUMPError(f"line {lineno}: invalid index pattern in {line!r}")

    return RawIntegrals(
        n_orbitals=norb,
        n_electrons=nelec,
        core_h=core_h,
        eri=eri,
        e_nuc=0.0 if e_nuc is None else e_nuc,
        ms2=ms2,
    )


def read_fcidump(path: str | os.PathLike) -> RawIntegrals:
    with open(path) as f:
        return parse_fcidump(f)


def write_fcidump(raw: RawIntegrals, stream: TextIO | None = None, tol: float = 0.0) -> str:
    """Serialize ``raw`` in canonical order (one line per symmetry-unique entry).

    Values are written with ``repr`` so that re-parsing is bit-identical.
    """
    out = io.StringIO() if stream is None else stream
    n = raw.n_orbitals
    out.write(f" &FCI NORB={n:4d},NELEC={raw.n_electrons:2d},MS2={raw.ms2},\n")
    out.write("  ORBSYM=" + "1," * n + "\n  ISYM=1,\n &END\n")
    for i, j in itertools.product(range(n), repeat=2):
        if j > i:
            continue
        for k, l in itertools.product(range(n), repeat=2):
            if l > k or (i * (i + 1) // 2 + j) < (k * (k + 1) // 2 + l):
                continue
            v = raw.eri[i, j, k, l]
            if abs(v) > tol:
                out.write(f"{float(v)!r} {i + 1} {j + 1} {k + 1} {l + 1}\n")
    for i in range(n):
        for j in range(i + 1):
            v = raw.core_h[i, j]
            if abs(v) > tol:
                out.write(f"{float(v)!r} {i + 1} {j + 1} 0 0\n")
    out.write(f"{float(raw.e_nuc)!r} 0 0 0 0\n")
    return out.getvalue() if stream is None else ""


def to_chemist(raw: RawIntegrals) -> SpatialTensors:
    """Convert FCIDUMP integrals to the spin-summed ``(h_tilde, g_tilde)`` form."""
    g_tilde = raw.eri / 2
    h_tilde = raw.core_h - np.einsum("ikkj->ij", g_tilde)
    h_tilde = (h_tilde + h_tilde.T) / 2
    return SpatialTensors(
        h_tilde=h_tilde, g_tilde=g_tilde, e_nuc=raw.e_nuc, n_electrons=raw.n_electrons
    )


def spin_expand_matrix(mat: np.ndarray) -> np.ndarray:
    """Block-diagonal (spin-conserving) expansion ``M_{2i+s, 2j+s} = mat_ij``."""
    return np.kron(mat, np.eye(2))


def spin_expand_pairing(mat: np.ndarray) -> np.ndarray:
    """Spin-summed expansion ``M_{2i+s, 2j+t} = mat_ij`` for all ``s, t``."""
    return np.kron(mat, np.ones((2, 2)))


def spin_expand_tensors(tensors: SpatialTensors) -> SpinTensors:
    n = tensors.n_orbitals
    delta = np.eye(2)
    g = np.einsum("ijkl,ab,cd->iajbkcld", tensors.g_tilde, delta, delta)
    return SpinTensors(
        h=spin_expand_matrix(tensors.h_tilde),
        g=g.reshape((2 * n,) * 4),
        e_nuc=tensors.e_nuc,
    )


def spin_expand_fragment(
    lambda_tilde: np.ndarray, u_tilde: np.ndarray, atol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Expand a spatial fragment ``(lambda_tilde, u_tilde)`` to spin orbitals.

    Every spin combination of ``lambda`` receives ``lambda_tilde[i, j]``; the
    rotation acts identically on both spins and never mixes them.

    Raises:
        ValueError: ``u_tilde`` is not orthogonal to ``atol``.
    """
    n = u_tilde.shape[0]
    if not np.allclose(u_tilde @ u_tilde.T, np.eye(n), atol=atol, rtol=0):
        raise ValueError("u_tilde is not orthogonal")
    return spin_expand_pairing(lambda_tilde), spin_expand_matrix(u_tilde)
