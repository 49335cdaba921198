from __future__ import annotations

import numpy as np
import pytest

from fluidfrag.fock import _kernels_py, kernels
from fluidfrag.fock.basis import SectorBasis

compiled = pytest.importorskip("fluidfrag.fock._kernels")

SECTORS = [(4, 2), (6, 3), (8, 4), (12, 4)]


def canonical(table):
    src, dst, pq, sign = table
    order = np.lexsort((dst, src, pq))
    return src[order], dst[order], pq[order], sign[order]


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "python")


@pytest.mark.parametrize("n_modes, n_elec", SECTORS)
def test_tables_agree(n_modes, n_elec):
    states = SectorBasis(n_modes, n_elec).states
    a = canonical(compiled.build_table(states, n_modes))
    b = canonical(_kernels_py.build_table(states, n_modes))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("n_modes, n_elec", SECTORS)
def test_kernels_agree(n_modes, n_elec, rng):
    states = SectorBasis(n_modes, n_elec).states
    table = _kernels_py.build_table(states, n_modes)
    dim, n2 = len(states), n_modes**2
    x = rng.standard_normal(dim)
    t = rng.standard_normal(n2)
    z = rng.standard_normal((n2, dim))
    np.testing.assert_allclose(
        compiled.apply_one_body(t, *table, x), _kernels_py.apply_one_body(t, *table, x), atol=1e-12
    )
    np.testing.assert_allclose(
        compiled.excite_all(*table, x, n2), _kernels_py.excite_all(*table, x, n2), atol=1e-12
    )
    np.testing.assert_allclose(compiled.contract(*table, z), _kernels_py.contract(*table, z), atol=1e-12)
