from __future__ import annotations

import numpy as np
import pytest

import oracles
import shared
from fluidfrag.fluid import (
    RepartitionSolution,
    Variant,
    allocate,
    apply_repartition,
    build_cache,
    extracted_operator,
    iterate,
    linear_system,
    measurement_cost,
    n_variables,
    proxy_cost,
    reflection_fragment,
    repartitioned_variances,
    solve_c,
    stationarity_residual,
)
from fluidfrag.fock import ProxyState, SectorBasis, covariance, expectation, variance
from fluidfrag.fragments import Fragment, FragmentSet, diagonalize_one_electron, reconstruct_spin
from fluidfrag.metrics import exact_report


def random_state(basis, rng):
    x = rng.standard_normal(basis.dim)
    return ProxyState(basis, x / np.linalg.norm(x), "FCI", 0.0)


def toy_set(rng, n_o=3, n_f=2):
    h = oracles.random_symmetric(n_o, rng)
    frags = tuple(
        Fragment("two_electron", oracles.random_orthogonal(n_o, rng), oracles.random_symmetric(n_o, rng))
        for _ in range(n_f)
    )
    return FragmentSet(diagonalize_one_electron(h), frags, "GFRO")


def dense(state_basis, x):
    full = np.zeros(2**state_basis.n_modes)
    full[state_basis.states] = x
    return full


VARIANTS = ["full", "r1", "r2"]


def test_extracted_full_identity_rotation():
    f = Fragment("two_electron", np.eye(3), np.ones((3, 3)))
    op = extracted_operator(f, "full", 1)
    expected = np.zeros((6, 6))
    expected[2, 2] = expected[3, 3] = 1
    np.testing.assert_array_equal(op.matrix, expected)


def test_extracted_r1_vanishes_without_diagonal(rng):
    lam = oracles.random_symmetric(3, rng)
    np.fill_diagonal(lam, 0)
    f = Fragment("two_electron", oracles.random_orthogonal(3, rng), lam)
    assert not np.any(extracted_operator(f, "r1").matrix)


def test_extracted_r2_dense_oracle(rng):
    u, lam = oracles.random_orthogonal(3, rng), oracles.random_symmetric(3, rng)
    f = Fragment("two_electron", u, lam)
    b = SectorBasis(6, 3)
    s = random_state(b, rng)
    us = np.kron(u, np.eye(2))
    lam_spin = np.kron(lam, np.ones((2, 2)))
    ref_op = sum(lam_spin[p, q] * oracles.one_body(np.outer(us[p], us[p])) for p in range(6) for q in range(6))
    x = dense(b, s.amplitudes)
    assert expectation(extracted_operator(f, "r2"), s) == pytest.approx(x @ ref_op @ x, abs=1e-12)


def test_extracted_rejects_one_electron():
    with pytest.raises(ValueError):
        extracted_operator(diagonalize_one_electron(np.eye(2)), "full")


@pytest.mark.parametrize("variant", VARIANTS)
def test_cache_matches_direct_covariances(variant):
    sys_ = shared.system("h3p")
    fs = shared.fragments("h3p")
    phi = sys_.state("cisd")
    cache = build_cache(fs, phi, variant)
    for a, f in enumerate(fs.all_fragments):
        assert cache.var_frag[a] == pytest.approx(variance(f, phi), abs=1e-10)
    ops = [extracted_operator(fs.two_body[a - 1], variant, i) for a, i in cache.index_map]
    for k, ok in enumerate(ops):
        assert cache.cov_H0_O[k] == pytest.approx(covariance(fs.h0, ok, phi, symmetrized=True), abs=1e-10)
        own = fs.two_body[cache.index_map[k][0] - 1]
        assert cache.cov_Ha_O[k] == pytest.approx(covariance(own, ok, phi, symmetrized=True), abs=1e-10)
        for l, ol in enumerate(ops):
            assert cache.cov_OO[k, l] == pytest.approx(covariance(ok, ol, phi), abs=1e-10)
    assert np.all(np.diag(cache.cov_OO) >= -1e-12)
    assert np.min(np.linalg.eigvalsh(cache.cov_OO)) > -1e-9


def test_cache_against_dense_oracle():
    sys_ = shared.system("h3p")
    fs = shared.fragments("h3p")
    phi = sys_.state("cisd")
    cache = build_cache(fs, phi, "r2")
    x = dense(phi.basis, phi.amplitudes)
    for a, f in enumerate(fs.two_body, start=1):
        mat = oracles.fragment_matrix(f.lambda_tilde, f.u_tilde)
        assert cache.var_frag[a] == pytest.approx(x @ mat @ mat @ x - (x @ mat @ x) ** 2, abs=1e-10)


@pytest.mark.parametrize("tag, variant, n_c", [("h3p", "full", 18), ("h3p", "r1", 6), ("h3p", "r2", 6), ("h4", "full", 40), ("h4", "r2", 10)])
def test_variable_counts(tag, variant, n_c):
    assert n_variables(shared.fragments(tag), variant) == n_c
    assert build_cache(shared.fragments(tag), shared.system(tag).state("hf"), variant).n_variables == n_c


def test_unpaired_variables(rng):
    fs = toy_set(rng)
    assert n_variables(fs, "full", spin_paired=False) == 2 * 6
    with pytest.raises(ValueError, match="spin-paired"):
        apply_repartition(fs, np.ones(12), "full", spin_paired=False)


@pytest.mark.parametrize(
    "variances, expected",
    [((1, 1, 1), (1 / 3, 1 / 3, 1 / 3)), ((4, 1), (2 / 3, 1 / 3)), ((0, 0), (0.5, 0.5))],
)
def test_allocate_examples(variances, expected):
    np.testing.assert_allclose(allocate(np.array(variances, float)), expected, atol=1e-15)


def test_allocate_floor_and_identity(rng):
    v = np.array([0.0, 2.0, 3.0])
    m = allocate(v)
    assert m[0] > 0 and m.sum() == pytest.approx(1)
    v = rng.uniform(0.1, 2, 7)
    assert measurement_cost(v, allocate(v)) == pytest.approx(np.sum(np.sqrt(v)) ** 2, rel=1e-12)
    with pytest.raises(ValueError):
        allocate(np.array([-1.0, 1.0]))


def test_solve_decoupled_gives_zero():
    # identity-frame fragments on a determinant: every extracted operator has a definite value
    h0 = diagonalize_one_electron(np.diag([0.0, 1.0, 2.0]))
    fs = FragmentSet(h0, (Fragment("two_electron", np.eye(3), np.eye(3)),), "GFRO")
    b = SectorBasis(6, 2)
    hf = ProxyState(b, b.unit(0b11), "HF", 0.0)
    cache = build_cache(fs, hf, "full")
    np.testing.assert_array_equal(solve_c(cache, np.array([0.5, 0.5])), 0.0)


def test_solve_single_fragment_r2_closed_form(rng):
    fs = toy_set(rng, n_f=1)
    phi = random_state(SectorBasis(6, 3), rng)
    m = np.array([0.3, 0.7])
    cache = build_cache(fs, phi, "r2")
    o = extracted_operator(fs.two_body[0], "r2")
    num = covariance(fs.two_body[0], o, phi, symmetrized=True) / m[1] - covariance(fs.h0, o, phi, symmetrized=True) / m[0]
    c = num / (2 * (1 / m[0] + 1 / m[1]) * variance(o, phi))
    np.testing.assert_allclose(solve_c(cache, m), [c], rtol=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_solve_minimizes_proxy_cost(variant, rng):
    fs = shared.fragments("h4")
    cache = build_cache(fs, shared.system("h4").state("cisd"), variant)
    m = allocate(cache.var_frag)
    c = solve_c(cache, m)
    best = proxy_cost(cache, c, m)
    assert best <= proxy_cost(cache, np.zeros_like(c), m)
    for _ in range(5):
        assert best <= proxy_cost(cache, c + 1e-3 * rng.standard_normal(len(c)), m) + 1e-12
    a, rhs = linear_system(cache, m)
    assert stationarity_residual(cache, m, c) < 1e-9 * (1 + np.linalg.norm(rhs))


@pytest.mark.parametrize("variant", VARIANTS)
def test_variance_expansion_matches_direct(variant, rng):
    fs = shared.fragments("h3p")
    phi = shared.system("h3p").state("cisd")
    cache = build_cache(fs, phi, variant)
    c = rng.standard_normal(cache.n_variables)
    new = apply_repartition(fs, c, variant)
    direct = [variance(f, phi) for f in new.all_fragments]
    np.testing.assert_allclose(repartitioned_variances(cache, c), direct, atol=1e-9)


def test_apply_zero_is_identity():
    fs = shared.fragments("h3p")
    assert apply_repartition(fs, np.zeros(18), "full") is fs


@pytest.mark.parametrize("variant", VARIANTS)
def test_repartition_preserves_tensors(variant, rng):
    fs = shared.fragments("h4")
    h_ref, g_ref = reconstruct_spin(fs)
    for _ in range(10):
        c = rng.standard_normal(n_variables(fs, variant))
        h, g = reconstruct_spin(apply_repartition(fs, c, variant))
        np.testing.assert_allclose(h, h_ref, atol=1e-10)
        np.testing.assert_allclose(g, g_ref, atol=1e-10)


def test_expectation_preserved_on_random_states(rng):
    fs = toy_set(rng)
    b = SectorBasis(6, 3)
    new = apply_repartition(fs, rng.standard_normal(n_variables(fs, "full")), "full")
    for _ in range(100):
        s = random_state(b, rng)
        before = sum(expectation(f, s) for f in fs.all_fragments)
        after = sum(expectation(f, s) for f in new.all_fragments)
        assert after == pytest.approx(before, abs=1e-9)


def test_r2_unit_coefficients_give_reflection_form(rng):
    fs = toy_set(rng, n_f=2)
    new = apply_repartition(fs, np.ones(2), "r2")
    for old, frag in zip(fs.two_body, new.two_body):
        u = np.kron(old.u_tilde, np.eye(2))
        lam = np.kron(old.lambda_tilde, np.ones((2, 2)))
        r = [np.eye(64) - 2 * oracles.one_body(np.outer(u[p], u[p])) for p in range(6)]
        refl = sum(lam[p, q] / 4 * r[p] @ r[q] for p in range(6) for q in range(6))
        got = oracles.fragment_matrix(frag.lambda_tilde, frag.u_tilde, frag.linear_part(), frag.offset)
        shift = lam.sum() / 4
        np.testing.assert_allclose(got + shift * np.eye(64), refl, atol=1e-10)
        rf = reflection_fragment(old)
        np.testing.assert_allclose(
            oracles.fragment_matrix(rf.lambda_tilde, rf.u_tilde, rf.linear_part(), rf.offset), refl, atol=1e-10
        )


def test_iterate_single_fragment_trivial():
    h0 = diagonalize_one_electron(np.diag([0.0, 1.0]))
    fs = FragmentSet(h0, (Fragment("two_electron", np.eye(2), np.eye(2)),), "GFRO")
    b = SectorBasis(4, 2)
    hf = ProxyState(b, b.unit(0b11), "HF", 0.0)
    sol = iterate(fs, hf, "full")
    assert sol.converged and sol.iterations == 1
    np.testing.assert_array_equal(sol.c, 0)


@pytest.mark.parametrize("tag", ["h3p", "h4"])
@pytest.mark.parametrize("variant", VARIANTS)
def test_iterate_descends(tag, variant):
    sol, _ = shared.optimized(tag, variant)
    h = np.array(sol.history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert sol.converged and sol.iterations <= 50
    assert sol.n_c == n_variables(shared.fragments(tag), variant)
    assert sol.m.sum() == pytest.approx(1) and np.all(sol.m > 0)


@pytest.mark.parametrize("tag", ["h3p", "h4"])
def test_variant_nesting(tag):
    full = shared.optimized(tag, "full")[0].predicted_eps2M
    assert full <= shared.optimized(tag, "r1")[0].predicted_eps2M + 1e-12
    assert full <= shared.optimized(tag, "r2")[0].predicted_eps2M + 1e-12


def test_full_beats_baseline_exactly():
    psi = shared.system("h4").state("fci")
    base = exact_report(shared.fragments("h4"), None, psi).eps2M
    _, new = shared.optimized("h4", "full")
    sol = shared.optimized("h4", "full")[0]
    assert exact_report(new, sol.m, psi).eps2M <= base


def test_full_variant_is_rank_deficient():
    # sum_i P_i = N is constant in a fixed-electron sector
    assert shared.optimized("h3p", "full")[0].rank_deficient


def test_solution_round_trip():
    sol, _ = shared.optimized("h3p", "r2")
    again = RepartitionSolution.loads(sol.dumps())
    np.testing.assert_array_equal(again.c, sol.c)
    np.testing.assert_array_equal(again.m, sol.m)
    assert again.variant is Variant.R2 and again.iterations == sol.iterations
    assert again.dumps() == sol.dumps()


def test_solution_rejects_bad_m():
    with pytest.raises(ValueError):
        RepartitionSolution("full", np.zeros(1), np.array([0.5, 0.6]), 0.0, 1, True)


def test_iterate_rejects_bad_tol():
    with pytest.raises(ValueError):
        iterate(shared.fragments("h3p"), shared.system("h3p").state("hf"), "r1", tol=0)
