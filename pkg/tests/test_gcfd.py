import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fidgauss import cayley, gcfd
from fidgauss.errors import EnumerationTooLarge, SingularCross, SingularGradH
from fidgauss.estimate import gaussian_loglik
from fidgauss.model import Dataset, build_sigma, grad_g, ma1_model, make_jittered_grid, matern_model, simulate, toy_model
from fidgauss.vech import vech

from conftest import random_skew
from oracles import central_fd, rel_err


def _random_factors(rng, d):
    a = random_skew(rng, d, 0.8)
    lam = np.sort(rng.uniform(0.5, 3.0, d))[::-1]
    return a, lam


def _m_to_al(vec, d):
    rows, cols = np.triu_indices(d, 1)
    a = np.zeros((d, d))
    a[rows, cols] = vec[: rows.size]
    return a - a.T, vec[rows.size:]


def _al_to_m(a, lam):
    rows, cols = np.triu_indices(a.shape[0], 1)
    return np.concatenate([a[rows, cols], lam])


def test_invert_dga_cases(rng):
    y = rng.standard_normal(4)
    np.testing.assert_allclose(gcfd.invert_dga(np.zeros((4, 4)), np.ones(4), y), y)
    np.testing.assert_allclose(gcfd.invert_dga(np.zeros((2, 2)), np.array([2.0, 1.0]), np.array([4.0, 3.0])), [2.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 8), seed=st.integers(0, 10_000))
def test_dga_round_trip(d, seed):
    rng = np.random.default_rng(seed)
    a, lam = _random_factors(rng, d)
    y = rng.standard_normal((3, d))
    u = gcfd.invert_dga(a, lam, y)
    back = gcfd.apply_dga(a, lam, u)
    assert np.max(np.abs(back - y)) / np.max(np.abs(y)) < 1e-9
    np.testing.assert_allclose(gcfd.apply_dga(a, lam, u[0]), y[0], rtol=1e-9, atol=1e-12)


def test_grad_y_matches_finite_differences(rng):
    for _ in range(50):
        d = int(rng.integers(2, 6))
        a, lam = _random_factors(rng, d)
        y = rng.standard_normal(d)
        u = gcfd.invert_dga(a, lam, y)
        fd = central_fd(lambda mvec: gcfd.apply_dga(*_m_to_al(mvec, d), u), _al_to_m(a, lam))
        assert rel_err(gcfd.grad_y(a, lam, y[None, :]), fd) < 1e-5


def test_grad_y_zero_and_stacking(rng):
    a, lam = _random_factors(rng, 3)
    assert np.array_equal(gcfd.grad_y(a, lam, np.zeros((1, 3))), np.zeros((3, 6)))
    y = rng.standard_normal((3, 3))
    full = gcfd.grad_y(a, lam, y)
    assert full.shape == (9, 6)
    np.testing.assert_allclose(full[:3], gcfd.grad_y(a, lam, y[:1]))
    np.testing.assert_allclose(full[6:], gcfd.grad_y(a, lam, y[2:]))


def test_grad_h_identity_case():
    gh = gcfd.grad_h(np.zeros((2, 2)), np.ones(2), check=False)
    # columns: A_01, lam_0, lam_1; d Sigma / d lam_0 = 2 J^{00}
    np.testing.assert_allclose(gh[:, 1], [2.0, 0.0, 0.0])


def test_grad_h_matches_finite_differences(rng):
    for _ in range(50):
        d = int(rng.integers(2, 6))
        a, lam = _random_factors(rng, d)
        fd = central_fd(lambda mvec: vech(cayley.reconstruct_sigma(*_m_to_al(mvec, d))), _al_to_m(a, lam))
        assert rel_err(gcfd.grad_h(a, lam), fd) < 1e-5


def test_grad_h_invertible_d2(rng):
    for _ in range(20):
        a, lam = _random_factors(rng, 2)
        gh = gcfd.grad_h(a, lam)
        assert gh.shape == (3, 3) and np.linalg.cond(gh) < 1e8


def test_grad_h_singular_on_tied_eigenvalues():
    with pytest.raises(SingularGradH):
        gcfd.grad_h(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(SingularGradH):
        gcfd.solve_grad_h(np.zeros((2, 2)), np.ones(2), np.ones((3, 1)))


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 6), p=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_structured_solve_matches_dense(d, p, seed):
    rng = np.random.default_rng(seed)
    a, lam = _random_factors(rng, d)
    gg = rng.standard_normal((d * (d + 1) // 2, p))
    dense = np.linalg.solve(gcfd.grad_h(a, lam, check=False), gg)
    assert rel_err(gcfd.solve_grad_h(a, lam, gg), dense) < 1e-8
    y = rng.standard_normal((3, d))
    assert rel_err(gcfd.grad_y_times(a, lam, y, dense), gcfd.grad_y(a, lam, y) @ dense) < 1e-10


def test_d_functional_cases():
    assert gcfd.d_functional(np.eye(2), 2) == pytest.approx(math.log(2.0))
    x = np.vstack([np.diag([3.0, 4.0]), np.zeros((2, 2))])
    assert gcfd.d_functional(x, 4) == pytest.approx(-0.5 * math.log(9.0))
    with pytest.raises(SingularCross):
        gcfd.d_functional(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))


def _model_cases(rng):
    sites = make_jittered_grid(2, 2, 0.1, rng)
    return [
        (toy_model(), lambda r: np.array([r.uniform(0.2, 5)])),
        (ma1_model(3), lambda r: np.array([r.uniform(0.05, 0.95) * r.choice([-1, 1]), r.uniform(0.5, 10)])),
        (ma1_model(5), lambda r: np.array([r.uniform(0.05, 0.95) * r.choice([-1, 1]), r.uniform(0.5, 10)])),
        (matern_model(sites), lambda r: np.array([r.uniform(0.5, 3), r.uniform(1, 8), r.uniform(0.5, 2)])),
    ]


def _permissible_factors(mod, th, rng):
    spec = cayley.spectral_decompose(build_sigma(mod, th))
    zs = [z for z in cayley.all_signatures(mod.d) if cayley.is_permissible(spec.s, z)]
    z = zs[rng.integers(len(zs))]
    return cayley.cayley_factors(spec, z)


def test_projection_properties(rng):
    for mod, sample in _model_cases(rng):
        for _ in range(50):
            th = sample(rng)
            cf = _permissible_factors(mod, th, rng)
            q, proj = gcfd.projection_q(gcfd.grad_h(cf.a, cf.lam), grad_g(mod, th))
            assert np.max(np.abs(proj @ proj - proj)) < 1e-9
            assert np.max(np.abs(proj - proj.T)) < 1e-12
            assert abs(np.trace(proj) - mod.p) < 1e-9
            assert np.max(np.abs(q @ q.T - proj)) < 1e-8


def test_projection_full_dimensional(rng):
    a, lam = _random_factors(rng, 2)
    gh = gcfd.grad_h(a, lam)
    _, proj = gcfd.projection_q(gh, rng.standard_normal((3, 3)))
    np.testing.assert_allclose(proj, np.eye(3), atol=1e-10)


def test_projection_toy_and_ma1_rank():
    cf = _permissible_factors(toy_model(), [1.3], np.random.default_rng(0))
    _, proj = gcfd.projection_q(gcfd.grad_h(cf.a, cf.lam), grad_g(toy_model(), [1.3]))
    assert np.max(np.abs(proj @ proj - proj)) < 1e-10
    assert np.linalg.matrix_rank(proj) == 1
    mod = ma1_model(3)
    cf = _permissible_factors(mod, [0.5, 6.0], np.random.default_rng(0))
    _, proj = gcfd.projection_q(gcfd.grad_h(cf.a, cf.lam), grad_g(mod, [0.5, 6.0]))
    assert np.trace(proj) == pytest.approx(2.0)


def q_form(cf, y, gg):
    """Projection-based product of the three D factors."""
    gh = gcfd.grad_h(cf.a, cf.lam)
    gy = gcfd.grad_y(cf.a, cf.lam, y)
    q, _ = gcfd.projection_q(gh, gg)
    return (gcfd.d_functional(gy @ q, n=y.size) - gcfd.d_functional(gh @ q)
            + gcfd.d_functional(gg))


def test_q_form_equivalence(rng):
    worst = 0.0
    for mod, sample in _model_cases(rng):
        for _ in range(50):
            th = sample(rng)
            data = simulate(mod, th, 4, rng)
            cf = _permissible_factors(mod, th, rng)
            gg = grad_g(mod, th)
            simple = gcfd.d_functional(gcfd.grad_y(cf.a, cf.lam, data.y)
                                       @ np.linalg.solve(gcfd.grad_h(cf.a, cf.lam), gg), n=data.y.size)
            worst = max(worst, abs(q_form(cf, data.y, gg) - simple))
    assert worst < 1e-8


def test_toy_terms_finite(rng):
    mod = toy_model()
    data = simulate(mod, [1.5], 5, rng)
    terms = [gcfd.log_jacobian_term([1.5], z, data, mod) for z in cayley.all_signatures(2)]
    assert all(t.permissible and np.isfinite(t.log_j) for t in terms)


def test_term_structured_equals_dense(rng):
    for mod, sample in _model_cases(rng):
        th = sample(rng)
        data = simulate(mod, th, 3, rng)
        for z in cayley.all_signatures(mod.d):
            t1 = gcfd.log_jacobian_term(th, z, data, mod, method="structured")
            t2 = gcfd.log_jacobian_term(th, z, data, mod, method="dense")
            assert t1.permissible == t2.permissible
            if t1.permissible:
                assert abs(t1.log_j - t2.log_j) < 1e-9


def test_term_impermissible():
    # Sigma = diag(4, 1): S = I, so Z = -I gives S Z = -I
    mod = toy_model(np.diag([4.0, 1.0]))
    data = Dataset(y=np.array([[1.0, 2.0]]))
    term = gcfd.log_jacobian_term([1.0], np.array([-1, -1]), data, mod)
    assert not term.permissible and term.log_j == gcfd.EXCLUDED


def test_term_scaling(rng):
    mod = ma1_model(4)
    th = np.array([0.4, 3.0])
    data = simulate(mod, th, 3, rng)
    z = np.ones(4, dtype=np.int8)
    base = gcfd.log_jacobian_term(th, z, data, mod).log_j
    for c in (0.5, 2.0, 7.0):
        scaled = gcfd.log_jacobian_term(th, z, Dataset(c * data.y), mod).log_j
        assert scaled - base == pytest.approx(-mod.p * math.log(c), abs=1e-9)


def test_terms_agree_across_signatures(rng):
    # the directional derivatives are C (Omega + dLam/Lam) C^T y and Z cancels
    mod = matern_model(make_jittered_grid(2, 3, 0.1, rng))
    th = np.array([1.5, 4.0, 1.2])
    data = simulate(mod, th, 3, rng)
    vals = [gcfd.log_jacobian_term(th, z, data, mod).log_j for z in cayley.all_signatures(mod.d)]
    vals = [v for v in vals if np.isfinite(v)]
    assert len(vals) > 1 and np.ptp(vals) < 1e-9


def test_sum_cases(rng):
    mod = toy_model()
    data = simulate(mod, [1.0], 4, rng)
    z = np.array([1, 1], dtype=np.int8)
    one = gcfd.log_jacobian_term([1.0], z, data, mod).log_j
    ev1 = gcfd.log_jacobian_sum([1.0], z[None, :], data, mod)
    assert ev1.log_j_sum == pytest.approx(one) and ev1.n_permissible == 1
    ev2 = gcfd.log_jacobian_sum([1.0], np.stack([z, z]), data, mod)
    assert ev2.log_j_sum == pytest.approx(math.log(2) + one) and ev2.n_permissible == 2
    assert ev2.log_like == pytest.approx(gaussian_loglik([1.0], data, mod))


def test_sum_all_impermissible():
    mod = toy_model(np.diag([4.0, 1.0]))
    data = Dataset(y=np.array([[1.0, 2.0]]))
    ev = gcfd.log_jacobian_sum([1.0], np.array([[-1, -1], [-1, -1]]), data, mod)
    assert ev.n_permissible == 0 and ev.log_j_sum == gcfd.EXCLUDED


def test_degenerate_term_is_dropped_with_warning():
    mod = ma1_model(3)
    data = Dataset(y=np.array([[1.0, 2.0, 0.5]]))
    with pytest.warns(RuntimeWarning):
        ev = gcfd.log_jacobian_sum([0.0, 2.0], cayley.all_signatures(3), data, mod)
    assert ev.n_permissible == 0 and ev.n_degenerate > 0


def test_full_gcfd(rng):
    mod = toy_model()
    data = simulate(mod, [2.0], 5, rng)
    full = gcfd.log_gcfd_full([2.0], data, mod)
    assert np.isfinite(full)
    ev = gcfd.log_jacobian_sum([2.0], cayley.all_signatures(2), data, mod)
    assert full == ev.log_like + ev.log_j_sum
    with pytest.raises(EnumerationTooLarge):
        gcfd.log_gcfd_full([0.5, 1.0], Dataset(np.zeros((1, 13))), ma1_model(13))


def test_toy_target_closed_form(rng):
    # For Sigma = theta * Sigma0 the directional derivative is y / (2 theta), so the
    # D factor is 2 theta sqrt(n) / ||y|| for every permissible Z.
    mod = toy_model()
    data = simulate(mod, [1.7], 6, rng)
    for th in (0.3, 1.0, 4.2):
        t = gcfd.log_jacobian_term([th], np.array([1, 1]), data, mod)
        expected = math.log(2 * th * math.sqrt(data.y.size) / np.linalg.norm(data.y))
        assert t.log_j == pytest.approx(expected, abs=1e-12)


def test_marginalization_identity(rng):
    mod = toy_model()
    data = simulate(mod, [1.3], 5, rng)
    d, k = 2, 2
    zs = cayley.all_signatures(d)
    th = [1.1]
    full = math.exp(gcfd.log_jacobian_sum(th, zs, data, mod).log_j_sum)
    tuples = [np.stack([zs[i], zs[j]]) for i in range(len(zs)) for j in range(len(zs))]
    assert len(tuples) == 2 ** (k * (d - 1))
    total = sum(math.exp(gcfd.log_jacobian_sum(th, t, data, mod).log_j_sum) for t in tuples)
    avg = total / (k * 2 ** ((k - 1) * (d - 1)))
    assert abs(avg - full) / full < 1e-12


def test_toy_full_target_is_inverse_gamma(rng):
    # likelihood theta^{-md/2} exp(-Q/2theta) times a Jacobian proportional to theta
    from scipy import stats

    from fidgauss.model import TOY_SIGMA0

    mod = toy_model()
    data = simulate(mod, [2.0], 7, rng)
    quad = np.einsum("ri,ij,rj->", data.y, np.linalg.inv(TOY_SIGMA0), data.y)
    law = stats.invgamma(data.y.size / 2 - 2, scale=quad / 2)
    ths = np.array([0.4, 1.0, 2.5, 9.0])
    ours = np.array([gcfd.log_gcfd_full([t], data, mod) for t in ths])
    np.testing.assert_allclose(np.diff(ours), np.diff(law.logpdf(ths)), atol=1e-10)
