"""Pulse-sequence propagation and entanglement traces.

Fast path: the rotating-frame Hamiltonian commutes with S_z, so the
electron coherence after a CPMG sequence factorizes over the bath,
W = prod_k M_k, with each per-carbon factor computed in closed form by
:mod:`nvbath.kernels`.  The electron-nitrogen pair prepared in
(|0,+1> + |-1,0>)/sqrt(2) then dephases into an X-state whose concurrence
is |W|; the deterministic A_par phase is tracked separately.

Slow path: :func:`full_oracle_propagate` does exact piecewise-constant
propagation of the whole register and reduces to the 4x4 pair state, used
to cross-check the factorized path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _io, kernels, model, spincore, tomography

__all__ = [
    "CoherenceTrace",
    "EntanglementTrace",
    "PulseSequence",
    "bath_coherence",
    "carbon_coherence_factor",
    "coherence_scan",
    "cpmg_unit_propagators",
    "dephased_bell_state",
    "entanglement_trace",
    "full_oracle_propagate",
    "nitrogen_phase",
    "p0_from_w",
    "pair_coherence",
    "quasi_static_coherence",
    "sigma_from_tc",
    "tc_from_sigma",
    "unit_rotation_geometry",
]


@dataclass(frozen=True)
class PulseSequence:
    """Symbolic pulse sequence: free(t), hahn(tau), cpmg(tau, n), prep(tau1)."""

    kind: str
    tau: float = 0.0
    n: int = 0
    t: float = 0.0

    @classmethod
    def free(cls, t):
        if not t >= 0:
            raise ValueError("free evolution time must be nonnegative")
        return cls(kind="free", t=float(t))

    @classmethod
    def hahn(cls, tau):
        if not tau > 0:
            raise ValueError("tau must be positive")
        return cls(kind="hahn", tau=float(tau))

    @classmethod
    def cpmg(cls, tau, n):
        if not tau > 0:
            raise ValueError("tau must be positive")
        if int(n) != n or n < 1:
            raise ValueError("n must be a positive integer")
        return cls(kind="cpmg", tau=float(tau), n=int(n))

    @classmethod
    def prep(cls, tau1):
        if not tau1 > 0:
            raise ValueError("tau1 must be positive")
        return cls(kind="prep", tau=float(tau1))

    @property
    def total_time(self):
        if self.kind == "free":
            return self.t
        if self.kind == "hahn":
            return 2.0 * self.tau
        if self.kind == "cpmg":
            return 2.0 * self.n * self.tau
        return 4.0 * self.tau  # prep unit tau1-pi-2tau1-pi-tau1


@dataclass(frozen=True)
class CoherenceTrace:
    """Sampled electron coherence W against tau or total time."""

    x: np.ndarray
    w: np.ndarray
    n: int
    x_kind: str = "tau"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.x.shape != self.w.shape or self.x.ndim != 1:
            raise ValueError("x and w must be 1-d arrays of equal length")
        if np.abs(self.w).max(initial=0.0) > 1 + 1e-9:
            raise ValueError("|w| exceeds 1")

    def to_csv(self, path):
        meta = {"n": self.n, "x_kind": self.x_kind, **self.metadata}
        _io.write_csv(path, {self.x_kind: self.x, "w": self.w}, meta)

    @classmethod
    def from_csv(cls, path):
        meta, cols = _io.read_csv(path)
        x_kind = meta.pop("x_kind", "tau")
        n = int(float(meta.pop("n")))
        return cls(x=cols[x_kind], w=cols["w"], n=n, x_kind=x_kind, metadata=meta)


@dataclass(frozen=True)
class EntanglementTrace:
    """Concurrence against total evolution time at fixed tau.

    ``w`` optionally carries the signed coherence values behind ``c``.
    """

    t: np.ndarray
    c: np.ndarray
    tau: float
    w: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        if self.t.shape != self.c.shape or self.t.ndim != 1:
            raise ValueError("t and c must be 1-d arrays of equal length")
        if self.c.min(initial=0.0) < -1e-12 or self.c.max(initial=0.0) > 1 + 1e-9:
            raise ValueError("concurrence out of [0, 1]")

    def to_csv(self, path):
        meta = {"tau_us": _io.format_float(self.tau), **self.metadata}
        cols = {"t": self.t, "concurrence": self.c}
        if self.w is not None:
            cols["w"] = self.w
        _io.write_csv(path, cols, meta)


def _kernel_args(carbons, c):
    """Branch-1 generator components (ms = -1) plus the Larmor frequency."""
    wl = model.larmor_frequency(c)
    wz1 = np.array([wl - model.khz_to_rad(k.a_zz) for k in carbons])
    wx1 = np.array([-model.khz_to_rad(k.a_xz) for k in carbons])
    return wz1, wx1, wl


def cpmg_unit_propagators(k, c, tau):
    """The two conditional 2x2 propagators of one tau-pi-2tau-pi-tau unit."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    h0 = model.conditional_carbon_hamiltonian(k, c, 0)
    h1 = model.conditional_carbon_hamiltonian(k, c, -1)
    e0 = spincore.expm_hermitian(h0, tau)
    e1 = spincore.expm_hermitian(h1, tau)
    v0 = e0 @ spincore.expm_hermitian(h1, 2 * tau) @ e0
    v1 = e1 @ spincore.expm_hermitian(h0, 2 * tau) @ e1
    return v0, v1


_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def unit_rotation_geometry(k, c, tau):
    """Angle and axes of the two unit propagators, from their matrices.

    Returns ``(phi, axis0, axis1)``; the common rotation angle is in
    [0, 2*pi) and the axes are unit 3-vectors (zero vectors when the
    rotation is trivial).  Matrix-based, independent of the kernels.
    """
    v0, v1 = cpmg_unit_propagators(k, c, tau)

    def decompose(v):
        w = v.trace().real / 2.0
        vec = np.array([(1j * np.trace(s @ v) / 2.0).real for s in _PAULI])
        r = np.linalg.norm(vec)
        return w, (vec / r if r > 1e-14 else np.zeros(3)), r

    w0, n0, r0 = decompose(v0)
    _, n1, _ = decompose(v1)
    return 2.0 * np.arctan2(r0, np.clip(w0, -1, 1)), n0, n1


def carbon_coherence_factor(k, c, tau, n):
    """Coherence factor M_k of one maximally mixed carbon after CPMG(tau, n).

    M_k = Re Tr[U0 U1^dag]/2 with U0 = v0^(n/2) and U1 = v1^(n/2); the
    closed-form kernel evaluates it without building matrices.
    """
    _validate_cpmg(tau, n)
    wz1, wx1, wl = _kernel_args([k], c)
    return float(kernels.coherence_factors(wz1, wx1, wl, np.array([tau]), n)[0, 0])


def _validate_cpmg(tau, n):
    if not tau > 0:
        raise ValueError("tau must be positive")
    if int(n) != n or n < 2 or n % 2:
        raise ValueError("pulse count n must be even and >= 2 on the analytic path")


def bath_coherence(carbons, c, tau, n):
    """Electron coherence W = prod_k M_k for the supplied carbons."""
    _validate_cpmg(tau, n)
    if not carbons:
        return 1.0
    wz1, wx1, wl = _kernel_args(carbons, c)
    return float(kernels.coherence_scan(wz1, wx1, wl, np.array([tau]), n)[0])


def p0_from_w(w):
    """Detected |m_s=0> probability, P0 = (W + 1)/2."""
    return 0.5 * (np.asarray(w) + 1.0)


def coherence_scan(carbons, c, taus, n, metadata=None):
    """CoherenceTrace of W over a tau grid at fixed pulse count."""
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise ValueError("empty tau grid")
    _validate_cpmg(float(taus.min()), n)
    if len(carbons) == 0:
        w = np.ones_like(taus)
    else:
        wz1, wx1, wl = _kernel_args(carbons, c)
        w = kernels.coherence_scan(wz1, wx1, wl, taus, n)
    meta = {"carbons": ",".join(k.label for k in carbons), "frame": "rotating"}
    meta.update(metadata or {})
    return CoherenceTrace(x=taus, w=w, n=int(n), x_kind="tau", metadata=meta)


def dephased_bell_state(w, phi=0.0):
    """Two-qubit X-state with populations 1/2 and coherence (w/2) e^{i phi}.

    This is the pair state after pure electron dephasing of
    (|00> + |11>)/sqrt(2); its concurrence equals |w|.
    """
    if abs(w) > 1 + 1e-12:
        raise ValueError("|w| must not exceed 1")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5
    rho[0, 3] = 0.5 * w * np.exp(1j * phi)
    rho[3, 0] = np.conj(rho[0, 3])
    return rho


def werner_state(p):
    """p |Phi+><Phi+| + (1-p) I/4; concurrence max(0, (3p-1)/2)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    return p * dephased_bell_state(1.0) + (1.0 - p) * np.eye(4, dtype=complex) / 4.0


def nitrogen_phase(c, tau, n):
    """Deterministic A_par phase of the pair coherence after CPMG(tau, n).

    Both electron branches spend time n*tau in m_s = -1; the branches hold
    nitrogen m_I = +1 and m_I = 0 respectively, so the |00><11| element
    acquires exp(i * A_par * n * tau) relative to the prepared state.
    """
    return model.mhz_to_rad(c.a_par) * n * tau


def entanglement_trace(carbons, c, tau, n_values):
    """EntanglementTrace over ascending even pulse counts at fixed tau.

    For each n: t = 2*n*tau, W from the factorized bath coherence, then the
    concurrence of the corresponding dephased Bell state.
    """
    n_values = [int(n) for n in n_values]
    if any(n % 2 or n < 2 for n in n_values):
        raise ValueError("pulse counts must be even and >= 2")
    if sorted(n_values) != n_values:
        raise ValueError("pulse counts must be ascending")
    if not tau > 0:
        raise ValueError("tau must be positive")
    narr = np.asarray(n_values)
    if carbons:
        wz1, wx1, wl = _kernel_args(carbons, c)
        w = kernels.coherence_nsweep(wz1, wx1, wl, float(tau), narr)
    else:
        w = np.ones(len(n_values))
    conc = np.array(
        [
            tomography.concurrence(dephased_bell_state(wi, nitrogen_phase(c, tau, ni)))
            for wi, ni in zip(w, narr)
        ]
    )
    meta = {"carbons": ",".join(k.label for k in carbons)}
    return EntanglementTrace(t=2.0 * narr * tau, c=conc, tau=float(tau), w=w, metadata=meta)


def quasi_static_coherence(sigma, t):
    """Free-induction coherence under quasi-static Gaussian detuning.

    W(t) = exp(-sigma^2 t^2 / 2); the 1/e time is T_c = sqrt(2)/sigma.
    """
    if np.any(np.asarray(sigma) < 0) or np.any(np.asarray(t) < 0):
        raise ValueError("sigma and t must be nonnegative")
    out = np.exp(-0.5 * (np.asarray(sigma) * np.asarray(t)) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def tc_from_sigma(sigma):
    return np.sqrt(2.0) / sigma


def sigma_from_tc(tc):
    return np.sqrt(2.0) / tc


def _pair_embedding(de, dn):
    """0/1 matrix mapping the 4-dim pair basis into the (de*dn)-dim register.

    Qubit bases: electron |0> = m_s=0, |1> = m_s=-1 (register indices 1, 2
    when the spin-1 triplet is retained); nitrogen |0> = m_I=+1, |1> =
    m_I=0 (always the first two register indices).
    """
    e_idx = (0, 1) if de == 2 else (1, 2)
    n_idx = (0, 1)
    p = np.zeros((de * dn, 4))
    for ie in range(2):
        for im in range(2):
            p[e_idx[ie] * dn + n_idx[im], 2 * ie + im] = 1.0
    return p


def _electron_x(de):
    if de == 2:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    x = np.eye(3, dtype=complex)
    x[1, 1] = x[2, 2] = 0
    x[1, 2] = x[2, 1] = 1  # swap m_s = 0 and m_s = -1, leave m_s = +1 alone
    return x


def full_oracle_propagate(cfg, seq, initial, frame="rotating", prep_bath_evolution=False):
    """Exact full-register propagation, reduced to the 4x4 pair state.

    The initial pair state (on electron (x) nitrogen qubit subspaces) is
    tensored with maximally mixed carbons, evolved piecewise-constantly with
    instantaneous electron X pulses, and the carbons (plus any spin-1
    spectator levels) are traced out.  prep sequences return the input
    unchanged unless ``prep_bath_evolution`` is set, in which case one
    tau1-pi-2tau1-pi-tau1 unit is applied.
    """
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (4, 4):
        raise ValueError("initial state must be 4x4 (electron x nitrogen)")
    if not spincore.is_hermitian(initial):
        raise ValueError("initial state must be Hermitian")
    if abs(np.trace(initial).real - 1.0) > 1e-8:
        raise ValueError("initial state must have unit trace")
    de, dn, m = cfg.electron_levels, cfg.nitrogen_levels, len(cfg.carbons)
    dim = de * dn * 2**m
    if dim > 4096:
        raise ValueError(f"register dimension {dim} exceeds oracle capacity")

    if seq.kind == "prep" and not prep_bath_evolution:
        return initial.copy()

    p = _pair_embedding(de, dn)
    rho = spincore.kron(p @ initial @ p.T, np.eye(2**m) / 2**m)

    h = model.build_full_hamiltonian(cfg, frame)
    vals, vecs = np.linalg.eigh(h)

    def u(dt):
        return (vecs * np.exp(-1j * vals * dt)) @ vecs.conj().T

    x_full = spincore.kron(_electron_x(de), np.eye(dn * 2**m))

    if seq.kind == "free":
        g = u(seq.t)
    elif seq.kind == "hahn":
        ut = u(seq.tau)
        g = ut @ x_full @ ut
    elif seq.kind in ("cpmg", "prep"):
        tau = seq.tau
        n = seq.n if seq.kind == "cpmg" else 2
        ut, u2t = u(tau), u(2 * tau)
        if n % 2 == 0:
            unit = ut @ x_full @ u2t @ x_full @ ut
            g = np.linalg.matrix_power(unit, n // 2)
        else:
            g = ut @ x_full @ np.linalg.matrix_power(u2t @ x_full, n - 1) @ ut
    else:
        raise ValueError(f"unknown sequence kind {seq.kind!r}")

    rho = g @ rho @ g.conj().T
    reduced = spincore.partial_trace(rho, [de, dn] + [2] * m, keep=(0, 1))
    return p.T @ reduced @ p


def pair_coherence(rho4):
    """Complex pair coherence, twice the |00><11| element."""
    return 2.0 * complex(np.asarray(rho4)[0, 3])
