import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_collision import qmath
from cascade_collision.errors import DimensionError, NotHermitianError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 8)


def _taylor_expm(a, terms=40, squarings=8):
    """Scaling-and-squaring Taylor series: independent of any eigensolver."""
    a = a / 2**squarings
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


@settings(max_examples=60, deadline=None)
@given(seeds, dims)
def test_jacobi_matches_lapack_eigenvalues(seed, d):
    h = qmath.random_hermitian(np.random.default_rng(seed), d) * 5
    w, v = qmath.eig_hermitian(h)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(h), atol=1e-12)
    np.testing.assert_allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-12)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(d), atol=1e-12)


def test_jacobi_degenerate_and_diagonal():
    w, v = qmath.eig_hermitian(np.eye(3))
    np.testing.assert_array_equal(w, [1, 1, 1])
    w, _ = qmath.eig_hermitian(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(w, [-1.0, 2.0, 3.0])


def test_jacobi_dimension_64(rng):
    h = qmath.random_hermitian(rng, 64)
    w, v = qmath.eig_hermitian(h)
    np.testing.assert_allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-12)


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        qmath.eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_expm_pauli_closed_form():
    theta = 0.7
    expected = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * SX
    np.testing.assert_allclose(qmath.expm_unitary(SX, theta), expected, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6), st.floats(-3, 3))
def test_expm_matches_taylor(seed, d, theta):
    h = qmath.random_hermitian(np.random.default_rng(seed), d) * 3
    u = qmath.expm_unitary(h, theta)
    np.testing.assert_allclose(u, _taylor_expm(-1j * theta * h), atol=1e-11)
    assert qmath.is_unitary(u)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_partial_trace_against_einsum(seed, da, db, dc):
    rng = np.random.default_rng(seed)
    layout = qmath.SpaceLayout((da, db, dc))
    x = rng.normal(size=(layout.dim,) * 2) + 1j * rng.normal(size=(layout.dim,) * 2)
    t = x.reshape(da, db, dc, da, db, dc)
    np.testing.assert_allclose(qmath.partial_trace(x, layout, [0, 2]),
                               np.einsum("ibkjbl->ikjl", t).reshape(da * dc, da * dc), atol=1e-12)
    np.testing.assert_allclose(qmath.partial_trace(x, layout, [1]), np.einsum("aibajb->ij", t), atol=1e-12)
    np.testing.assert_allclose(qmath.partial_trace(x, layout, []), np.trace(x).reshape(1, 1), atol=1e-12)


def test_partial_trace_of_product(rng):
    a = qmath.random_density(rng, 2)
    b = qmath.random_density(rng, 3)
    layout = qmath.SpaceLayout((2, 3))
    np.testing.assert_allclose(qmath.partial_trace(np.kron(a, b), layout, [0]), a, atol=1e-14)
    np.testing.assert_allclose(qmath.partial_trace(np.kron(a, b), layout, [1]), b, atol=1e-14)


def test_kron_matches_numpy(rng):
    a = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    b = rng.normal(size=(4, 2))
    np.testing.assert_array_equal(qmath.kron(a, b), np.kron(a, b))
    np.testing.assert_array_equal(qmath.kron_all([a, b, a]), np.kron(np.kron(a, b), a))


def test_embed_and_embed_factors(rng):
    layout = qmath.SpaceLayout((2, 3, 2))
    a = qmath.random_hermitian(rng, 3)
    np.testing.assert_allclose(qmath.embed(a, layout, 1), np.kron(np.kron(np.eye(2), a), np.eye(2)))
    # operator on factors (2, 0), ordered as given
    p, q = qmath.random_hermitian(rng, 2), qmath.random_hermitian(rng, 2)
    got = qmath.embed_factors(np.kron(p, q), layout, [2, 0])
    np.testing.assert_allclose(got, np.kron(np.kron(q, np.eye(3)), p), atol=1e-14)
    with pytest.raises(DimensionError):
        qmath.embed(a, layout, 0)


def test_trace_distance_and_min_eigenvalue():
    e = np.diag([1.0, 0.0]).astype(complex)
    g = np.diag([0.0, 1.0]).astype(complex)
    assert qmath.trace_distance(e, g) == pytest.approx(1.0)
    assert qmath.trace_distance(e, e) == pytest.approx(0.0, abs=1e-15)
    assert qmath.min_eigenvalue(np.diag([0.5, -0.1])) == pytest.approx(-0.1)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 4))
def test_random_samplers(seed, d, n_ops):
    rng = np.random.default_rng(seed)
    h = qmath.random_hermitian(rng, d)
    assert qmath.is_hermitian(h)
    assert np.linalg.norm(h) == pytest.approx(1.0)
    rho = qmath.random_density(rng, d)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(rho).min() > -1e-12
    kraus = qmath.random_kraus(rng, d, n_ops)
    np.testing.assert_allclose(sum(k.conj().T @ k for k in kraus), np.eye(d), atol=1e-12)
    np.testing.assert_allclose(np.trace(qmath.apply_kraus(kraus, rho)), 1.0, atol=1e-12)


def test_hermitize_and_residual():
    a = np.array([[1, 2j], [0, 1]])
    assert qmath.hermiticity_residual(a) > 1
    assert qmath.is_hermitian(qmath.hermitize(a))
    assert qmath.is_hermitian(SZ)
