"""Time the compiled kernels against the pure-numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from fluidfrag.fock import _kernels_py
from fluidfrag.fock.basis import SectorBasis

try:
    from fluidfrag.fock import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

# (label, spin modes, electrons): H4, LiH and NH3 sectors
SECTORS = [("h4", 8, 4), ("lih", 12, 4), ("nh3", 16, 10)]


def bench(impl, n_modes, n_elec, repeat, rng):
    states = SectorBasis(n_modes, n_elec).states
    table = impl.build_table(states, n_modes)
    dim, n2 = len(states), n_modes**2
    x = rng.standard_normal(dim)
    t = rng.standard_normal(n2)
    z = rng.standard_normal((n2, dim))
    ops = {
        "build_table": lambda: impl.build_table(states, n_modes),
        "apply_one_body": lambda: impl.apply_one_body(t, *table, x),
        "excite_all": lambda: impl.excite_all(*table, x, n2),
        "contract": lambda: impl.contract(*table, z),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in ops.items()}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _compiled is None:
        raise SystemExit("compiled extension not built")
    rng = np.random.default_rng(0)
    print("sector\tkernel\tpython_s\tcompiled_s\tspeedup")
    for label, n, k in SECTORS:
        py = bench(_kernels_py, n, k, args.repeat, rng)
        cy = bench(_compiled, n, k, args.repeat, rng)
        for name in py:
            print(f"{label}\t{name}\t{py[name]:.5e}\t{cy[name]:.5e}\t{py[name] / cy[name]:.2f}")


if __name__ == "__main__":
    main()
