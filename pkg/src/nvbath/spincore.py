"""Dense complex linear algebra and spin-operator primitives.

All matrices are plain numpy arrays of complex128.  Hamiltonians are in
angular frequency units (rad/us) throughout the package; unit conversion
from the laboratory units happens once, in :mod:`nvbath.model`.
"""
from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpinOperators",
    "dagger",
    "expm_hermitian",
    "is_hermitian",
    "kron",
    "partial_trace",
    "spin_operators",
    "trace_norm",
]

HERMITIAN_TOL = 1e-10

_EINSUM_LETTERS = string.ascii_lowercase + string.ascii_uppercase


def dagger(a):
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def is_hermitian(a, tol=HERMITIAN_TOL):
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and np.abs(a - a.conj().T).max() <= tol


@dataclass(frozen=True)
class SpinOperators:
    """Angular-momentum matrices for one spin, basis ordered by decreasing m."""

    s: float
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray


def spin_operators(s):
    """Standard spin matrices for spin quantum number ``s``.

    Parameters
    ----------
    s : float
        Spin quantum number, 1/2 or 1.

    Returns
    -------
    SpinOperators
        ``ix``, ``iy``, ``iz`` in the basis ordered by decreasing magnetic
        quantum number, so ``iz = diag(s, s-1, ..., -s)``.
    """
    if s not in (0.5, 1):
        raise ValueError(f"unsupported spin quantum number {s!r}; expected 1/2 or 1")
    dim = int(round(2 * s)) + 1
    m = s - np.arange(dim)
    sp = np.zeros((dim, dim), dtype=complex)
    for i in range(1, dim):
        # <m+1| S+ |m> with m = m[i]
        sp[i - 1, i] = np.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    sm = sp.conj().T
    ix = (sp + sm) / 2
    iy = (sp - sm) / 2j
    iz = np.diag(m).astype(complex)
    return SpinOperators(s=float(s), ix=ix, iy=iy, iz=iz)


def kron(a, b):
    """Kronecker product with ``a``'s index slower-varying."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def expm_hermitian(h, t):
    """Unitary propagator ``exp(-i h t)`` of a Hermitian generator.

    ``h`` is in rad/us and ``t`` in us.  Computed by eigendecomposition,
    which is exact for the piecewise-constant Hamiltonians used here.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expm_hermitian expects a square matrix")
    if not is_hermitian(h):
        raise ValueError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


def partial_trace(rho, dims, keep):
    """Reduced matrix over the subsystems listed in ``keep``.

    Parameters
    ----------
    rho : array
        Square matrix on the tensor product of subsystems of size ``dims``.
    dims : sequence of int
        Subsystem dimensions, slowest-varying first.
    keep : iterable of int
        Indices (into ``dims``) of the subsystems to retain, in order.
    """
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    n = len(dims)
    if any(d < 1 for d in dims):
        raise ValueError("subsystem dimensions must be positive")
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"matrix shape {rho.shape} does not match dims product {total}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError("keep indices out of range")
    if 2 * n > len(_EINSUM_LETTERS):
        raise ValueError("too many subsystems")
    row = list(_EINSUM_LETTERS[:n])
    col = [_EINSUM_LETTERS[n + i] if i in keep else row[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, rho.reshape(dims + dims))
    dk = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(dk, dk)


def trace_norm(a):
    """Sum of singular values of a square matrix."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("trace_norm expects a square matrix")
    return float(np.linalg.svd(a, compute_uv=False).sum())
