# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the CPMG coherence kernels.

Mirror of _kernels_py (the reference implementation); see that module for
the derivation of the closed-form factor.  Scalar loops in C, no numpy
C API, results identical to the fallback at double precision.
"""
from libc.math cimport atan2, cos, hypot, sin, sqrt

import numpy as np

BACKEND = "cython"

cdef double _TINY_AXIS = 1e-14


cdef struct Quat:
    double w
    double x
    double y
    double z


cdef inline Quat _rot(double wz, double wx, double t) noexcept nogil:
    cdef Quat q
    cdef double omega = hypot(wz, wx)
    cdef double half = 0.5 * omega * t
    cdef double s
    if omega > 0.0:
        s = sin(half) / omega
    else:
        s = 0.5 * t
    q.w = cos(half)
    q.x = wx * s
    q.y = 0.0
    q.z = wz * s
    return q


cdef inline Quat _mul(Quat a, Quat b) noexcept nogil:
    cdef Quat q
    q.w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    q.x = a.w * b.x + b.w * a.x + a.y * b.z - a.z * b.y
    q.y = a.w * b.y + b.w * a.y + a.z * b.x - a.x * b.z
    q.z = a.w * b.z + b.w * a.z + a.x * b.y - a.y * b.x
    return q


cdef inline void _geometry(double wz1, double wx1, double wl, double tau,
                           double* phi, double* dot) noexcept nogil:
    cdef Quat e0 = _rot(wl, 0.0, tau)
    cdef Quat e1 = _rot(wz1, wx1, tau)
    cdef Quat e0d = _rot(wl, 0.0, 2.0 * tau)
    cdef Quat e1d = _rot(wz1, wx1, 2.0 * tau)
    cdef Quat v0 = _mul(_mul(e0, e1d), e0)
    cdef Quat v1 = _mul(_mul(e1, e0d), e1)
    cdef double w = v0.w
    cdef double r0 = sqrt(v0.x * v0.x + v0.y * v0.y + v0.z * v0.z)
    cdef double r1 = sqrt(v1.x * v1.x + v1.y * v1.y + v1.z * v1.z)
    if w > 1.0:
        w = 1.0
    elif w < -1.0:
        w = -1.0
    phi[0] = 2.0 * atan2(r0, w)
    if r0 < _TINY_AXIS or r1 < _TINY_AXIS:
        dot[0] = 1.0
    else:
        dot[0] = (v0.x * v1.x + v0.y * v1.y + v0.z * v1.z) / (r0 * r1)


cdef inline double _factor(double phi, double dot, double n) noexcept nogil:
    cdef double s = sin(0.25 * n * phi)
    return 1.0 - (1.0 - dot) * s * s


def unit_geometry(wz1, wx1, double wl, tau):
    """Scalar (phi, dot) of one CPMG unit; see _kernels_py.unit_geometry."""
    cdef double phi = 0.0
    cdef double dot = 0.0
    _geometry(float(wz1), float(wx1), wl, float(tau), &phi, &dot)
    return phi, dot


def coherence_factors(wz1, wx1, double wl, tau, n):
    """Per-carbon factors M_k on a tau grid; shape (len(wz1), len(tau))."""
    cdef double[::1] az = np.ascontiguousarray(wz1, dtype=np.float64)
    cdef double[::1] ax = np.ascontiguousarray(wx1, dtype=np.float64)
    cdef double[::1] ts = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double nf = float(n)
    cdef Py_ssize_t nk = az.shape[0], nt = ts.shape[0], i, j
    cdef double phi = 0.0, dot = 0.0
    out = np.empty((nk, nt), dtype=np.float64)
    cdef double[:, ::1] mv = out
    with nogil:
        for i in range(nk):
            for j in range(nt):
                _geometry(az[i], ax[i], wl, ts[j], &phi, &dot)
                mv[i, j] = _factor(phi, dot, nf)
    return out


def coherence_scan(wz1, wx1, double wl, tau, n):
    """Bath coherence W on a tau grid: product of the per-carbon factors."""
    cdef double[::1] az = np.ascontiguousarray(wz1, dtype=np.float64)
    cdef double[::1] ax = np.ascontiguousarray(wx1, dtype=np.float64)
    cdef double[::1] ts = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double nf = float(n)
    cdef Py_ssize_t nk = az.shape[0], nt = ts.shape[0], i, j
    cdef double phi = 0.0, dot = 0.0, acc
    out = np.empty(nt, dtype=np.float64)
    cdef double[::1] mv = out
    with nogil:
        for j in range(nt):
            acc = 1.0
            for i in range(nk):
                _geometry(az[i], ax[i], wl, ts[j], &phi, &dot)
                acc *= _factor(phi, dot, nf)
            mv[j] = acc
    return out


def coherence_nsweep(wz1, wx1, double wl, double tau, nvals):
    """Bath coherence at fixed tau for each pulse count in ``nvals``."""
    cdef double[::1] az = np.ascontiguousarray(wz1, dtype=np.float64)
    cdef double[::1] ax = np.ascontiguousarray(wx1, dtype=np.float64)
    cdef double[::1] ns = np.ascontiguousarray(nvals, dtype=np.float64)
    cdef Py_ssize_t nk = az.shape[0], nn = ns.shape[0], i, j
    cdef double phi = 0.0, dot = 0.0
    phis = np.empty(nk, dtype=np.float64)
    dots = np.empty(nk, dtype=np.float64)
    cdef double[::1] pv = phis
    cdef double[::1] dv = dots
    out = np.ones(nn, dtype=np.float64)
    cdef double[::1] mv = out
    with nogil:
        for i in range(nk):
            _geometry(az[i], ax[i], wl, tau, &phi, &dot)
            pv[i] = phi
            dv[i] = dot
        for j in range(nn):
            for i in range(nk):
                mv[j] *= _factor(pv[i], dv[i], ns[j])
    return out
