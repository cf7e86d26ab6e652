"""Numpy fallback backend for the CPMG coherence kernels.

Both conditional propagators of one CPMG unit (tau - pi - 2tau - pi - tau)
are SU(2) rotations with a common angle phi (their traces are equal by
cyclicity), so the per-carbon coherence factor after n pulses has the
closed form

    M(n) = 1 - (1 - n0.n1) * sin^2(n*phi/4),

where n0.n1 is the dot product of the two rotation axes.  Unitaries are
represented as quaternions: U = w*I - i*(x*sx + y*sy + z*sz) composes by
the Hamilton product in matrix order.

All frequencies are angular (rad/us).  The branch-0 generator is always
w_L*I_z; the branch-1 generator is wz1*I_z + wx1*I_x.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

_TINY_AXIS = 1e-14


def _rot(wz, wx, t):
    """Quaternion of exp(-i*(wz*Iz + wx*Ix)*t); components (w, x, y, z)."""
    omega = np.hypot(wz, wx)
    half = 0.5 * omega * t
    # sin(half)/omega -> t/2 as omega -> 0
    safe = np.where(omega > 0, omega, 1.0)
    s = np.where(omega > 0, np.sin(half) / safe, 0.5 * t)
    zeros = np.zeros_like(s)
    return np.cos(half), wx * s, zeros, wz * s


def _mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + bw * ax + ay * bz - az * by,
        aw * by + bw * ay + az * bx - ax * bz,
        aw * bz + bw * az + ax * by - ay * bx,
    )


def unit_geometry(wz1, wx1, wl, tau):
    """Rotation angle and axis-dot of the two conditional CPMG-unit propagators.

    Returns ``(phi, dot)`` with phi in [0, 2*pi).  When the unit rotation is
    trivial the axes are undefined and dot is reported as 1 (factor 1).
    Accepts scalars or broadcastable arrays.
    """
    tau = np.asarray(tau, dtype=float)
    e0 = _rot(wl, 0.0, tau)
    e1 = _rot(wz1, wx1, tau)
    e0d = _rot(wl, 0.0, 2.0 * tau)
    e1d = _rot(wz1, wx1, 2.0 * tau)
    v0 = _mul(_mul(e0, e1d), e0)
    v1 = _mul(_mul(e1, e0d), e1)
    w = np.clip(v0[0], -1.0, 1.0)
    n0 = np.stack(v0[1:])
    n1 = np.stack(v1[1:])
    r0 = np.sqrt((n0 * n0).sum(axis=0))
    r1 = np.sqrt((n1 * n1).sum(axis=0))
    phi = 2.0 * np.arctan2(r0, w)
    degenerate = (r0 < _TINY_AXIS) | (r1 < _TINY_AXIS)
    denom = np.where(degenerate, 1.0, r0 * r1)
    dot = np.where(degenerate, 1.0, (n0 * n1).sum(axis=0) / denom)
    if np.ndim(phi) == 0:
        return float(phi), float(dot)
    return phi, dot


def coherence_factors(wz1, wx1, wl, tau, n):
    """Per-carbon factors M_k on a tau grid; shape (len(wz1), len(tau))."""
    wz1 = np.asarray(wz1, dtype=float)[:, None]
    wx1 = np.asarray(wx1, dtype=float)[:, None]
    tau = np.asarray(tau, dtype=float)[None, :]
    phi, dot = unit_geometry(wz1, wx1, wl, tau)
    s = np.sin(0.25 * n * phi)
    return 1.0 - (1.0 - dot) * s * s


def coherence_scan(wz1, wx1, wl, tau, n):
    """Bath coherence W on a tau grid: product of the per-carbon factors."""
    return coherence_factors(wz1, wx1, wl, tau, n).prod(axis=0)


def coherence_nsweep(wz1, wx1, wl, tau, nvals):
    """Bath coherence at fixed tau for each pulse count in ``nvals``."""
    wz1 = np.asarray(wz1, dtype=float)
    wx1 = np.asarray(wx1, dtype=float)
    nvals = np.asarray(nvals, dtype=float)[None, :]
    phi, dot = unit_geometry(wz1, wx1, wl, float(tau))
    phi = np.asarray(phi, dtype=float)[:, None]
    dot = np.asarray(dot, dtype=float)[:, None]
    s = np.sin(0.25 * nvals * phi)
    return (1.0 - (1.0 - dot) * s * s).prod(axis=0)
