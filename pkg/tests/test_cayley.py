
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fidgauss import cayley
from fidgauss.errors import DegenerateEigenvaluesWarning, NotPermissible, NotPositiveDefinite
from fidgauss.model import build_sigma, ma1_model

from conftest import random_skew, random_spd

ROT = np.array([[0.6, -0.8], [0.8, 0.6]])
A2 = np.array([[0.0, 0.5], [-0.5, 0.0]])


def test_forward_identity():
    assert np.array_equal(cayley.cayley_forward(np.zeros((3, 3))), np.eye(3))


def test_forward_2x2():
    # (I - A)(I + A)^{-1} with A = [[0, .5], [-.5, 0]] evaluated by hand
    np.testing.assert_allclose(cayley.cayley_forward(A2), ROT, atol=1e-15)


def test_forward_orthogonal(rng):
    s = cayley.cayley_forward(random_skew(rng, 6))
    assert np.max(np.abs(s.T @ s - np.eye(6))) < 1e-12
    assert np.linalg.det(s) == pytest.approx(1.0)


def test_inverse_cases():
    assert np.array_equal(cayley.cayley_inverse(np.eye(3)), np.zeros((3, 3)))
    np.testing.assert_allclose(cayley.cayley_inverse(ROT), A2, atol=1e-15)
    with pytest.raises(NotPermissible):
        cayley.cayley_inverse(-np.eye(2))


@settings(max_examples=60, deadline=None)
@given(d=st.integers(2, 10), seed=st.integers(0, 2**32 - 1))
def test_round_trip_and_orthogonality(d, seed):
    rng = np.random.default_rng(seed)
    a = random_skew(rng, d)
    s = cayley.cayley_forward(a)
    assert np.max(np.abs(s.T @ s - np.eye(d))) < 1e-12
    assert np.max(np.abs(cayley.cayley_inverse(s) - a)) < 1e-10


def test_spectral_diagonal():
    f = cayley.spectral_decompose(np.diag([4.0, 1.0]))
    np.testing.assert_allclose(np.abs(f.s), np.eye(2))
    assert np.linalg.det(f.s) == pytest.approx(1.0)
    np.testing.assert_allclose(f.lam, [2.0, 1.0])


def test_spectral_ma1_round_trip():
    sigma = build_sigma(ma1_model(3), [0.5, 6.0])
    f = cayley.spectral_decompose(sigma)
    rec = (f.s * f.lam**2) @ f.s.T
    assert np.max(np.abs(rec - sigma)) < 1e-10
    assert np.all(np.diff(f.lam) < 0)


def test_spectral_not_pd():
    with pytest.raises(NotPositiveDefinite):
        cayley.spectral_decompose(np.diag([1.0, -0.1]))


def test_spectral_degenerate_warns():
    with pytest.warns(DegenerateEigenvaluesWarning):
        f = cayley.spectral_decompose(6.0 * np.eye(3))
    assert f.degenerate


def test_signature_small_cases(rng):
    assert np.array_equal(cayley.signature_sample(1, rng), [1])
    allowed = {(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)}
    assert {tuple(z) for z in cayley.all_signatures(3)} == allowed
    for _ in range(50):
        assert tuple(cayley.signature_sample(3, rng)) in allowed


def test_signature_uniform(rng):
    draws = cayley.sample_signatures(4, 100_000, rng)
    assert np.all(np.prod(draws, axis=1) == 1)
    keys, counts = np.unique(draws, axis=0, return_counts=True)
    assert len(keys) == 8
    assert np.all(np.abs(counts / 100_000 - 0.125) < 0.01)


def test_permissible_cases(rng):
    assert cayley.is_permissible(np.eye(2), np.array([1, 1]))
    assert not cayley.is_permissible(np.eye(2), np.array([-1, -1]))


@pytest.mark.parametrize("d", [2, 3, 4, 6, 8, 10])
def test_existence_of_permissible_signature(rng, d):
    for _ in range(5):
        f = cayley.spectral_decompose(random_spd(rng, d))
        ok = [cayley.is_permissible(f.s, z) for z in cayley.all_signatures(d)]
        assert any(ok)


def test_reconstruct_cases():
    np.testing.assert_allclose(cayley.reconstruct_sigma(np.zeros((2, 2)), [1.0, 1.0]), np.eye(2))
    expected = ROT @ np.diag([4.0, 1.0]) @ ROT.T
    np.testing.assert_allclose(cayley.reconstruct_sigma(A2, [2.0, 1.0]), expected, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_reconstruction_through_every_permissible_signature(d, seed):
    rng = np.random.default_rng(seed)
    sigma = random_spd(rng, d)
    f = cayley.spectral_decompose(sigma)
    zs = cayley.all_signatures(d)
    for z in zs[rng.choice(len(zs), size=min(len(zs), 8), replace=False)]:
        if not cayley.is_permissible(f.s, z):
            continue
        cf = cayley.cayley_factors(f, z)
        rec = cayley.reconstruct_sigma(cf.a, cf.lam)
        assert np.linalg.norm(rec - sigma) / np.linalg.norm(sigma) < 1e-8


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 12), n=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
def test_signature_even_parity(d, n, seed):
    zs = cayley.sample_signatures(d, n, np.random.default_rng(seed))
    assert zs.shape == (n, d)
    assert np.all(np.sum(zs == -1, axis=1) % 2 == 0)


def test_signature_enumeration_is_even_parity():
    for d in range(1, 9):
        zs = cayley.all_signatures(d)
        assert zs.shape == (2 ** (d - 1), d)
        assert len({tuple(z) for z in zs}) == len(zs)
        assert np.all(np.prod(zs, axis=1) == 1)
