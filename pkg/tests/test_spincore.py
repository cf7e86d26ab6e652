import numpy as np
import pytest
from scipy.linalg import expm

from nvbath import spincore


def random_hermitian(dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def test_dagger():
    a = np.array([[1, 2j], [3, 4]], dtype=complex)
    assert np.array_equal(spincore.dagger(a), a.conj().T)


def test_is_hermitian_tolerance():
    h = random_hermitian(3, 0)
    assert spincore.is_hermitian(h)
    bumped = h.copy()
    bumped[0, 1] += 1e-8
    assert not spincore.is_hermitian(bumped)
    assert spincore.is_hermitian(bumped, tol=1e-6)


@pytest.mark.parametrize("s", [0.5, 1])
def test_spin_operators_algebra(s):
    ops = spincore.spin_operators(s)
    # commutation [Ix, Iy] = i Iz and cyclic
    for a, b, c in [(ops.ix, ops.iy, ops.iz), (ops.iy, ops.iz, ops.ix), (ops.iz, ops.ix, ops.iy)]:
        assert np.allclose(a @ b - b @ a, 1j * c, atol=1e-14)
    # Casimir I^2 = s(s+1)
    casimir = ops.ix @ ops.ix + ops.iy @ ops.iy + ops.iz @ ops.iz
    assert np.allclose(casimir, s * (s + 1) * np.eye(casimir.shape[0]), atol=1e-14)
    # basis ordered by decreasing m
    assert np.allclose(np.diag(ops.iz).real, s - np.arange(int(2 * s) + 1))


def test_spin_operators_rejects_other_spins():
    with pytest.raises(ValueError):
        spincore.spin_operators(1.5)


def test_expm_hermitian_matches_scipy():
    h = random_hermitian(5, 1)
    for t in (0.0, 0.37, 2.5):
        u = spincore.expm_hermitian(h, t)
        assert np.allclose(u, expm(-1j * h * t), atol=1e-12)
        assert np.allclose(u @ u.conj().T, np.eye(5), atol=1e-12)


def test_expm_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        spincore.expm_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        spincore.expm_hermitian(np.zeros((2, 3)), 1.0)


def test_kron_shapes_and_values():
    a = np.diag([1.0, 2.0])
    b = np.array([[0, 1], [1, 0]], dtype=complex)
    k = spincore.kron(a, b)
    assert k.shape == (4, 4)
    assert np.array_equal(k[:2, :2], b)
    assert np.array_equal(k[2:, 2:], 2 * b)


def test_partial_trace_product_state():
    rng = np.random.default_rng(2)

    def pure(dim):
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        return np.outer(v, v.conj())

    ra, rb, rc = pure(2), pure(3), pure(2)
    rho = spincore.kron(spincore.kron(ra, rb), rc)
    assert np.allclose(spincore.partial_trace(rho, [2, 3, 2], keep=[0]), ra, atol=1e-12)
    assert np.allclose(spincore.partial_trace(rho, [2, 3, 2], keep=[1]), rb, atol=1e-12)
    assert np.allclose(
        spincore.partial_trace(rho, [2, 3, 2], keep=[0, 2]), spincore.kron(ra, rc), atol=1e-12
    )


def test_partial_trace_preserves_trace_and_hermiticity():
    rho = random_hermitian(12, 3)
    rho = rho @ rho.conj().T
    rho /= np.trace(rho).real
    red = spincore.partial_trace(rho, [2, 3, 2], keep=[1])
    assert abs(np.trace(red).real - 1.0) < 1e-12
    assert spincore.is_hermitian(red)


def test_partial_trace_keep_all_is_identity():
    rho = random_hermitian(6, 4)
    assert np.allclose(spincore.partial_trace(rho, [2, 3], keep=[0, 1]), rho, atol=1e-14)


def test_partial_trace_errors():
    rho = np.eye(4) / 4
    with pytest.raises(ValueError):
        spincore.partial_trace(rho, [2, 3], keep=[0])
    with pytest.raises(ValueError):
        spincore.partial_trace(rho, [2, 2], keep=[])
    with pytest.raises(ValueError):
        spincore.partial_trace(rho, [2, 2], keep=[2])


def test_trace_norm():
    h = random_hermitian(4, 5)
    vals = np.linalg.eigvalsh(h)
    assert abs(spincore.trace_norm(h) - np.abs(vals).sum()) < 1e-12
    with pytest.raises(ValueError):
        spincore.trace_norm(np.zeros((2, 3)))
