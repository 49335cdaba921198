"""Regenerate the FCIDUMP fixtures shipped in ``src/fluidfrag/data``.

Requires pyscf, which is not a runtime dependency of the package. Orbitals are
canonical RHF orbitals in the STO-3G basis; all electrons are correlated.

    python tools/make_fixtures.py
"""

from __future__ import annotations

import json
import pathlib

import numpy as np
from pyscf import ao2mo, gto, scf, tools

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "fluidfrag" / "data"

ANGLE_HNH = np.deg2rad(107.0)


def _nh3_geometry() -> list[tuple[str, tuple[float, float, float]]]:
    # C3v pyramid with R(N-H) = 1 A and all H-N-H angles equal to 107 degrees.
    cos_t = np.cos(ANGLE_HNH)
    # angle between each N-H bond and the C3 axis
    cos_b = np.sqrt((1 + 2 * cos_t) / 3)
    sin_b = np.sqrt(1 - cos_b**2)
    atoms = [("N", (0.0, 0.0, 0.0))]
    for k in range(3):
        phi = 2 * np.pi * k / 3
        atoms.append(("H", (sin_b * np.cos(phi), sin_b * np.sin(phi), -cos_b)))
    return atoms


MOLECULES = {
    "h3p": dict(atom=[("H", (0, 0, 0)), ("H", (0, 0, 1.0)), ("H", (0, 0, 2.0))], charge=1),
    "h4": dict(atom=[("H", (0, 0, 1.0 * k)) for k in range(4)], charge=0),
    "lih": dict(atom=[("Li", (0, 0, 0)), ("H", (0, 0, 1.0))], charge=0),
    "nh3": dict(atom=_nh3_geometry(), charge=0),
}


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    meta = {}
    for tag, spec in MOLECULES.items():
        mol = gto.M(atom=spec["atom"], basis="sto-3g", charge=spec["charge"], spin=0, unit="Angstrom", verbose=0)
        mf = scf.RHF(mol)
        mf.conv_tol = 1e-12
        mf.kernel()
        path = DATA / f"{tag}.fcidump"
        tools.fcidump.from_scf(mf, str(path), tol=1e-15)
        norb = mf.mo_coeff.shape[1]
        meta[tag] = {
            "basis": "sto-3g",
            "orbitals": "canonical RHF",
            "frozen_core": False,
            "geometry_angstrom": [[a, list(map(float, xyz))] for a, xyz in spec["atom"]],
            "charge": spec["charge"],
            "n_orbitals": norb,
            "n_electrons": int(mol.nelectron),
            "e_hf": float(mf.e_tot),
            "generator": "pyscf " + __import__("pyscf").__version__,
        }
        print(tag, norb, mol.nelectron, mf.e_tot)
    (DATA / "fixtures.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main()
