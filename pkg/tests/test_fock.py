from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import shared
from fluidfrag.fock import (
    OneBodyOperator,
    ProxyKind,
    ProxyState,
    SectorBasis,
    TwoBodyOperator,
    apply_one_body,
    apply_two_body,
    covariance,
    expectation,
    ground_state,
    rotate_state,
    rotation_generator,
    variance,
)
from fluidfrag.fock.states import excitation_level, rotate_vector


def random_state(basis: SectorBasis, rng) -> ProxyState:
    x = rng.standard_normal(basis.dim)
    return ProxyState(basis, x / np.linalg.norm(x), "FCI", 0.0)


def embed(basis: SectorBasis, x: np.ndarray) -> np.ndarray:
    full = np.zeros(2**basis.n_modes)
    full[basis.states] = x
    return full


def test_basis_layout():
    b = SectorBasis(6, 3)
    assert b.dim == 20
    assert np.all(np.diff(b.states) > 0)
    assert all(bin(w).count("1") == 3 for w in b.states)
    assert b.index_of(int(b.states[7])) == 7
    assert b.hf_word == 0b111
    with pytest.raises(KeyError):
        b.index_of(0b1)


def test_number_operator_on_occupied_mode():
    b = SectorBasis(4, 2)
    t = np.zeros((4, 4))
    t[0, 0] = 1
    x = b.unit(0b0011)
    np.testing.assert_array_equal(b.apply_one_body(t, x), x)


def test_annihilation_of_empty_mode():
    b = SectorBasis(4, 2)
    t = np.zeros((4, 4))
    t[0, 2] = 1  # E_0^2 needs mode 2 occupied
    assert not np.any(b.apply_one_body(t, b.unit(0b0011)))


@pytest.mark.parametrize("n_electrons", [1, 2, 3])
def test_excitations_match_dense_oracle(n_electrons, rng):
    n = 4
    b = SectorBasis(n, n_electrons)
    x = rng.standard_normal(b.dim)
    for p, q in itertools.product(range(n), repeat=2):
        t = np.zeros((n, n))
        t[p, q] = 1
        ref = oracles.excitation(n, p, q) @ embed(b, x)
        np.testing.assert_allclose(embed(b, b.apply_one_body(t, x)), ref, atol=1e-14)


def test_products_of_excitations_match_dense_oracle(rng):
    n = 4
    b = SectorBasis(n, 2)
    x = embed(b, rng.standard_normal(b.dim))
    for p, q, r, s in itertools.product(range(n), repeat=4):
        g = np.zeros((n,) * 4)
        g[p, q, r, s] = 1
        got = embed(b, TwoBodyOperator(g).apply(x[b.states], b))
        ref = oracles.excitation(n, p, q) @ oracles.excitation(n, r, s) @ x
        np.testing.assert_allclose(got, ref, atol=1e-13)


def test_random_two_body_matches_dense(rng):
    n = 6
    b = SectorBasis(n, 3)
    g = rng.standard_normal((n,) * 4)
    h = oracles.random_symmetric(n, rng)
    op = TwoBodyOperator(g, OneBodyOperator(h), offset=0.3)
    x = rng.standard_normal(b.dim)
    ref = oracles.two_body(g, h, 0.3) @ embed(b, x)
    np.testing.assert_allclose(embed(b, op.apply(x, b)), ref, atol=1e-12)


def test_idempotent_number_operator():
    b = SectorBasis(4, 1)
    g = np.zeros((4,) * 4)
    g[0, 0, 0, 0] = 1
    x = b.unit(0b0001)
    state = ProxyState(b, x, "HF", 0.0)
    np.testing.assert_allclose(apply_two_body(TwoBodyOperator(g), state), x)


def test_pure_offset(rng):
    b = SectorBasis(4, 2)
    s = random_state(b, rng)
    op = TwoBodyOperator(np.zeros((4,) * 4), offset=2.5)
    np.testing.assert_allclose(apply_two_body(op, s), 2.5 * s.amplitudes)
    assert covariance(op, OneBodyOperator(oracles.random_symmetric(4, rng)), s) == pytest.approx(0, abs=1e-12)


def test_dimension_mismatch():
    b = SectorBasis(4, 2)
    s = ProxyState(b, b.unit(0b11), "HF", 0.0)
    with pytest.raises(ValueError):
        apply_one_body(OneBodyOperator(np.eye(6)), s)
    with pytest.raises(ValueError):
        apply_two_body(TwoBodyOperator(np.zeros((6,) * 4)), s)


def test_one_body_operator_validation():
    with pytest.raises(ValueError, match="symmetric"):
        OneBodyOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_linearity(rng):
    b = SectorBasis(6, 2)
    x = rng.standard_normal(b.dim)
    a = OneBodyOperator(oracles.random_symmetric(6, rng))
    c = OneBodyOperator(oracles.random_symmetric(6, rng))
    np.testing.assert_allclose((a + c).apply(x, b), a.apply(x, b) + c.apply(x, b), atol=1e-12)
    np.testing.assert_allclose((2.0 * a).apply(x, b), 2 * a.apply(x, b), atol=1e-12)


def test_covariances_on_h3p_cisd_match_dense(rng):
    sys_ = shared.system("h3p")
    phi = sys_.state("cisd")
    x = embed(phi.basis, phi.amplitudes)
    ta, tb = oracles.random_symmetric(6, rng), oracles.random_symmetric(6, rng)
    da, db = oracles.one_body(ta), oracles.one_body(tb)
    ref = x @ da @ db @ x - (x @ da @ x) * (x @ db @ x)
    a, b = OneBodyOperator(ta), OneBodyOperator(tb)
    assert covariance(a, b, phi) == pytest.approx(ref, abs=1e-10)
    assert covariance(a, b, phi, symmetrized=True) == pytest.approx(2 * ref, abs=1e-10)
    assert variance(a, phi) >= -1e-12


def test_eigenstate_has_zero_variance():
    sys_ = shared.system("h3p")
    psi = sys_.state("fci")
    assert variance(sys_.hamiltonian, psi) == pytest.approx(0, abs=1e-10)
    assert expectation(sys_.hamiltonian, psi) == pytest.approx(psi.energy, abs=1e-12)


def test_h3p_hamiltonian_eigenvector():
    sys_ = shared.system("h3p")
    psi = sys_.state("fci")
    dense = oracles.spin_summed_hamiltonian(sys_.spatial.h_tilde, sys_.spatial.g_tilde)
    e_ref, _ = oracles.ground_energy(dense, 6, 2)
    np.testing.assert_allclose(apply_two_body(sys_.hamiltonian, psi), e_ref * psi.amplitudes, atol=1e-8)


def test_two_electron_cisd_is_fci():
    sys_ = shared.system("h3p")
    fci, cisd = sys_.state("fci"), sys_.state("cisd")
    np.testing.assert_allclose(cisd.amplitudes, fci.amplitudes, atol=1e-8)


@pytest.mark.parametrize("tag", ["h3p", "h4", "lih"])
def test_variational_nesting(tag):
    sys_ = shared.system(tag)
    e = [sys_.state(k).energy for k in ("hf", "cisd", "fci")]
    assert e[0] >= e[1] - 1e-10 >= e[2] - 2e-10


def test_h4_energies_against_dense_oracle():
    sys_ = shared.system("h4")
    dense = oracles.spin_summed_hamiltonian(sys_.spatial.h_tilde, sys_.spatial.g_tilde)
    e_ref, _ = oracles.ground_energy(dense, 8, 4)
    assert sys_.state("fci").energy == pytest.approx(e_ref, abs=1e-8)
    # CISD oracle: dense projection onto <= doubles
    idx = oracles.sector(8, 4)
    keep = idx[[bin(w ^ 0b1111).count("1") <= 4 for w in idx]]
    w = np.linalg.eigvalsh(dense[np.ix_(keep, keep)])
    assert sys_.state("cisd").energy == pytest.approx(w[0], abs=1e-8)


def test_cisd_support():
    phi = shared.system("h4").state("cisd")
    lvl = excitation_level(phi.basis.states, phi.basis.hf_word)
    assert not np.any(phi.amplitudes[lvl > 2])
    assert phi.kind is ProxyKind.CISD


def test_hf_state():
    hf = shared.system("h4").state("hf")
    assert hf.amplitudes[hf.basis.index_of(0b1111)] == 1.0


def test_ground_state_uses_iterative_solver_beyond_dense_limit():
    sys_ = shared.system("lih")  # sector dimension 495
    psi = sys_.state("fci")
    r = apply_two_body(sys_.hamiltonian, psi) - psi.energy * psi.amplitudes
    assert np.linalg.norm(r) < 1e-6


def test_proxy_state_rejects_unnormalized():
    b = SectorBasis(4, 2)
    with pytest.raises(ValueError, match="normalized"):
        ProxyState(b, 2 * b.unit(0b11), "HF", 0.0)


def test_rotate_identity(rng):
    s = random_state(SectorBasis(6, 3), rng)
    np.testing.assert_allclose(rotate_state(np.eye(6), s).amplitudes, s.amplitudes, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rotation_preserves_norm_and_inverts(seed):
    rng = np.random.default_rng(seed)
    b = SectorBasis(6, 3)
    s = random_state(b, rng)
    u = oracles.random_orthogonal(6, rng)
    r = rotate_state(u, s)
    assert np.linalg.norm(r.amplitudes) == pytest.approx(1, abs=1e-10)
    back = rotate_state(u.T, r)
    np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-9)


def test_rotated_number_expectation(rng):
    b = SectorBasis(6, 3)
    s = random_state(b, rng)
    u = oracles.random_orthogonal(6, rng)
    r = rotate_state(u, s)
    for p in range(6):
        t = np.zeros((6, 6))
        t[p, p] = 1
        lhs = expectation(OneBodyOperator(t), r)
        rhs = expectation(OneBodyOperator(np.outer(u[p], u[p])), s)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_rotation_matches_dense_exponential(rng):
    b = SectorBasis(4, 2)
    x = rng.standard_normal(b.dim)
    x /= np.linalg.norm(x)
    u = oracles.random_orthogonal(4, rng)
    ref = oracles.orbital_rotation(u) @ embed(b, x)
    np.testing.assert_allclose(embed(b, rotate_vector(u, x, b)), ref, atol=1e-10)


def test_rotation_rejects_improper():
    u = np.diag([1.0, 1.0, 1.0, -1.0])
    with pytest.raises(ValueError, match="determinant"):
        rotation_generator(u)
    with pytest.raises(ValueError, match="orthogonal"):
        rotation_generator(np.eye(4) * 1.1)


def test_rotation_by_pi_has_real_generator(rng):
    # eigenvalues -1, -1 rule out the principal logarithm
    q = oracles.random_orthogonal(4, rng)
    c, s = np.cos(0.7), np.sin(0.7)
    u = q @ np.array([[-1, 0, 0, 0], [0, -1, 0, 0], [0, 0, c, -s], [0, 0, s, c]]) @ q.T
    theta = rotation_generator(u)
    np.testing.assert_allclose(theta, -theta.T, atol=1e-14)
    np.testing.assert_allclose(scipy.linalg.expm(theta), u, atol=1e-10)
    b = SectorBasis(4, 1)
    action = np.column_stack([rotate_vector(u, e, b) for e in np.eye(4)])
    np.testing.assert_allclose(action, u, atol=1e-10)
