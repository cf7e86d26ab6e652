"""Two-qubit state metrics and the photon-count tomography chain.

Covers concurrence / trace distance / BLP non-Markovianity on one side,
and on the other the measurement pipeline: every tomography setting is
reduced (by local basis rotations) to one electron-population
probability p = (1 + <A (x) B>)/2, read out as a photon count against
bright/dark calibration counts, and a density matrix is recovered from
the counts by Poissonian maximum likelihood over the Cholesky-like
parameterization rho = T^dagger T / Tr(T^dagger T).
"""

from __future__ import annotations

import csv as _csv
import io as _stdio
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _io, spincore

FAIL_EIG = -1e-6  # spin-flip eigenvalues below this mean the input was not a state

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

SETTINGS = tuple(a + b for a in "IXYZ" for b in "IXYZ")

_SIGMA_YY = np.kron(_PAULI["Y"], _PAULI["Y"])


def setting_operator(label):
    """Tensor-product Pauli operator for a two-letter setting label."""
    if len(label) != 2 or any(ch not in _PAULI for ch in label):
        raise ValueError("setting label must be two of I, X, Y, Z")
    return np.kron(_PAULI[label[0]], _PAULI[label[1]])


def check_density_matrix(rho, dim=None):
    """Validate Hermiticity, unit trace, and near-positivity; return as array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {rho.shape[0]}")
    if not spincore.is_hermitian(rho, tol=1e-10):
        raise ValueError("density matrix must be Hermitian within 1e-10")
    if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
        raise ValueError("density matrix must have unit trace within 1e-10")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError("density matrix has an eigenvalue below -1e-9")
    return rho


def concurrence(rho):
    """Wootters concurrence C = max{0, sqrt(l1)-sqrt(l2)-sqrt(l3)-sqrt(l4)}.

    l_i are the descending eigenvalues of rho (sy(x)sy) rho* (sy(x)sy),
    conjugation in the computational product basis.  Tiny negative
    eigenvalues are clamped; anything below -1e-6 means the input was
    not a state and raises.
    """
    rho = check_density_matrix(rho, dim=4)
    r = rho @ _SIGMA_YY @ rho.conj() @ _SIGMA_YY
    lam = np.linalg.eigvals(r)
    if np.abs(lam.imag).max() > 1e-8:
        raise ValueError("eigenvalues of the spin-flip product are not real")
    lam = np.sort(lam.real)[::-1]
    if lam.min() < FAIL_EIG:
        raise ValueError(f"spin-flip eigenvalue {lam.min():g} below {FAIL_EIG:g}")
    lam = np.sqrt(np.maximum(lam, 0.0))
    return float(np.clip(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0))


def trace_distance(r1, r2):
    """D = (1/2) || r1 - r2 ||_1."""
    r1 = np.asarray(r1, dtype=complex)
    r2 = np.asarray(r2, dtype=complex)
    if r1.shape != r2.shape:
        raise ValueError("dimension mismatch")
    return 0.5 * spincore.trace_norm(r1 - r2)


def fidelity(rho, sigma):
    """Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    vals, vecs = np.linalg.eigh(rho)
    sqrt_rho = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T
    inner = np.linalg.eigvalsh(sqrt_rho @ sigma @ sqrt_rho)
    return float(np.sum(np.sqrt(np.maximum(inner, 0.0))) ** 2)


def blp_measure(t, d=None):
    """Sum of positive increments of d over the time-ordered trace.

    Accepts either blp_measure(t, d) with two arrays or a single
    sequence of (t, d) pairs.
    """
    if d is None:
        pts = np.asarray(t, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("expected a sequence of (t, d) pairs")
        t, d = pts[:, 0], pts[:, 1]
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    if t.shape != d.shape or t.ndim != 1:
        raise ValueError("t and d must be 1-d arrays of equal length")
    if np.any(np.diff(t) < 0):
        raise ValueError("t must be ascending")
    inc = np.diff(d)
    return float(np.sum(inc[inc > 0.0]))


@dataclass(frozen=True)
class ReadoutCalibration:
    """Mean photons per shot in the counting window for m_s=0 / m_s=-1.

    Defaults are representative room-temperature NV numbers chosen for
    this simulator, not calibrated against any measured dataset.
    """

    rate_bright: float = 0.03
    rate_dark: float = 0.02

    def __post_init__(self):
        if not self.rate_bright > self.rate_dark >= 0.0:
            raise ValueError("need rate_bright > rate_dark >= 0")


EXACT_CALIBRATION = ReadoutCalibration(rate_bright=1.0, rate_dark=0.0)


@dataclass(frozen=True)
class CountsRecord:
    """Photon counts for one tomography setting."""

    setting: str
    shots: int
    c_signal: float
    c_bright: float
    c_dark: float

    def __post_init__(self):
        setting_operator(self.setting)  # validates the label
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not self.c_bright > self.c_dark:
            raise ValueError("no readout contrast: c_bright must exceed c_dark")
        if min(self.c_signal, self.c_dark) < 0:
            raise ValueError("counts must be nonnegative")


def readout_probability(rec):
    """P0 = (C_signal - C_dark) / (C_bright - C_dark), deliberately unclipped."""
    contrast = rec.c_bright - rec.c_dark
    if contrast <= 0:
        raise ValueError("no readout contrast")
    return (rec.c_signal - rec.c_dark) / contrast


def expected_probability(rho, setting):
    """p = (1 + <A (x) B>)/2 for the given state and setting."""
    return 0.5 * (1.0 + float(np.trace(rho @ setting_operator(setting)).real))


def simulate_counts(rho, shots, cal=None, seed=0, settings=SETTINGS, exact=False):
    """Synthetic counts for each setting; deterministic for a given seed.

    Signal counts are Poisson with mean shots*(p*rate_bright +
    (1-p)*rate_dark); bright/dark calibration counts are Poisson at
    p = 1 and p = 0.  Sub-seeds are derived per setting so a parallel
    map over settings cannot reorder the stream.  With exact=True the
    Poisson draws are replaced by their means under EXACT_CALIBRATION,
    making readout_probability return the quantum probability exactly.
    """
    rho = check_density_matrix(rho, dim=4)
    shots = int(shots)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if cal is None:
        cal = EXACT_CALIBRATION if exact else ReadoutCalibration()
    probs = [np.clip(expected_probability(rho, s), 0.0, 1.0) for s in settings]
    records = []
    if exact:
        for s, p in zip(settings, probs):
            records.append(
                CountsRecord(
                    setting=s,
                    shots=shots,
                    c_signal=shots * (p * cal.rate_bright + (1.0 - p) * cal.rate_dark),
                    c_bright=shots * cal.rate_bright,
                    c_dark=shots * cal.rate_dark,
                )
            )
        return records
    seqs = np.random.SeedSequence(seed).spawn(len(settings))
    for s, p, sub in zip(settings, probs, seqs):
        rng = np.random.default_rng(sub)
        mean_sig = shots * (p * cal.rate_bright + (1.0 - p) * cal.rate_dark)
        c_sig = float(rng.poisson(mean_sig))
        c_b = float(rng.poisson(shots * cal.rate_bright))
        c_d = float(rng.poisson(shots * cal.rate_dark))
        records.append(
            CountsRecord(setting=s, shots=shots, c_signal=c_sig, c_bright=c_b, c_dark=c_d)
        )
    return records


class MLEError(RuntimeError):
    """MLE did not converge; carries the best iterate and gradient norm."""

    def __init__(self, message, rho, grad_norm):
        super().__init__(message)
        self.rho = rho
        self.grad_norm = grad_norm


_LOWER_IDX = [(i, j) for i in range(4) for j in range(4) if i > j]


def _t_from_params(x):
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = x[:4]
    for k, (i, j) in enumerate(_LOWER_IDX):
        t[i, j] = x[4 + 2 * k] + 1j * x[5 + 2 * k]
    return t


def _params_from_t(t):
    x = np.empty(16)
    x[:4] = np.real(np.diag(t))
    for k, (i, j) in enumerate(_LOWER_IDX):
        x[4 + 2 * k] = t[i, j].real
        x[5 + 2 * k] = t[i, j].imag
    return x


def _rho_from_t(t):
    g = t.conj().T @ t
    z = np.trace(g).real
    if z < 1e-300:
        raise ValueError("degenerate parameterization (zero trace)")
    return g / z, z


def _project_to_state(rho):
    """Nearest-ish physical state: Hermitize, clip eigenvalues, renormalize."""
    rho = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.maximum(vals, 0.0)
    if vals.sum() <= 0.0:
        return np.eye(rho.shape[0], dtype=complex) / rho.shape[0]
    vals /= vals.sum()
    return (vecs * vals) @ vecs.conj().T


def linear_inversion(records):
    """Direct Pauli inversion rho = (1/4) sum_s (2 p_s - 1) B_s, then projection."""
    rho = np.zeros((4, 4), dtype=complex)
    seen = set()
    for rec in records:
        if rec.setting in seen:
            raise ValueError(f"duplicate setting {rec.setting}")
        seen.add(rec.setting)
        p = readout_probability(rec)
        rho += (2.0 * p - 1.0) * setting_operator(rec.setting)
    if seen != set(SETTINGS):
        raise ValueError("linear inversion needs all 16 Pauli settings")
    return _project_to_state(rho / 4.0)


def _check_informationally_complete(records):
    mats = np.stack([setting_operator(r.setting).ravel() for r in records])
    if np.linalg.matrix_rank(mats, tol=1e-9) < 16:
        raise ValueError("settings are not informationally complete for two qubits")


def _negloglike_factory(records, cal):
    """Poisson negative log-likelihood over the 16 Cholesky parameters.

    Returns a function x -> (-logL, -grad); the gradient is analytic and
    pulled back through the normalized factorization rho = T^dag T / Z.
    """
    ops = np.stack([setting_operator(r.setting) for r in records])
    counts = np.array([r.c_signal for r in records])
    shots = np.array([float(r.shots) for r in records])
    span = cal.rate_bright - cal.rate_dark

    def negloglike(x):
        t = _t_from_params(x)
        rho, z = _rho_from_t(t)
        p = 0.5 * (1.0 + np.real(np.einsum("sij,ji->s", ops, rho)))
        mu = shots * (p * cal.rate_bright + (1.0 - p) * cal.rate_dark)
        mu = np.maximum(mu, 1e-12)
        ll = np.sum(counts * np.log(mu) - mu)
        # dL/drho = K, then pull back through the normalized factorization
        coeff = (counts / mu - 1.0) * shots * span * 0.5
        k = np.einsum("s,sij->ij", coeff, ops)
        m = (k - np.trace(k @ rho).real * np.eye(4)) / z
        gmat = 2.0 * t @ m
        grad = np.empty(16)
        grad[:4] = np.real(np.diag(gmat))
        for kk, (i, j) in enumerate(_LOWER_IDX):
            grad[4 + 2 * kk] = gmat[i, j].real
            grad[5 + 2 * kk] = gmat[i, j].imag
        return -ll, -grad

    return negloglike


def mle_reconstruct(records, cal=None, max_iter=2000, grad_tol=1e-8):
    """Poisson maximum-likelihood state from tomography counts.

    rho = T^dagger T / Tr(T^dagger T) with lower-triangular T (16 real
    parameters), initialized from projected linear inversion and
    optimized quasi-Newton (L-BFGS) with the analytic gradient.  The
    output satisfies the density-matrix invariants by construction.
    """
    records = list(records)
    if not records:
        raise ValueError("no counts records")
    _check_informationally_complete(records)
    if cal is None:
        cal = ReadoutCalibration()

    try:
        init = linear_inversion(records)
    except ValueError:
        init = np.eye(4, dtype=complex) / 4.0
    init = 0.999 * init + 0.001 * np.eye(4) / 4.0  # keep the Cholesky factor finite
    # rho = T^dag T with T lower-triangular: reverse-order Cholesky
    rev = np.arange(3, -1, -1)
    low = np.linalg.cholesky(init[np.ix_(rev, rev)])
    x0 = _params_from_t(low.conj().T[np.ix_(rev, rev)])

    negloglike = _negloglike_factory(records, cal)
    res = minimize(
        negloglike,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": grad_tol, "ftol": 1e-14},
    )
    rho, _ = _rho_from_t(_t_from_params(res.x))
    rho = 0.5 * (rho + rho.conj().T)
    grad_norm = float(np.max(np.abs(res.jac)))
    if not res.success and grad_norm > grad_tol:
        raise MLEError(
            f"MLE failed to converge: {res.message} (grad norm {grad_norm:.3e})",
            rho=rho,
            grad_norm=grad_norm,
        )
    return rho


def density_matrix_to_text(rho):
    """Serialize as a dimension line then dim^2 lines of 'row col re im'."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    lines = [str(dim)]
    for i in range(dim):
        for j in range(dim):
            lines.append(
                f"{i} {j} {_io.format_float(rho[i, j].real)} {_io.format_float(rho[i, j].imag)}"
            )
    return "\n".join(lines) + "\n"


def density_matrix_from_text(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    dim = int(lines[0])
    if len(lines) != 1 + dim * dim:
        raise ValueError("malformed density-matrix text")
    rho = np.zeros((dim, dim), dtype=complex)
    for ln in lines[1:]:
        i_s, j_s, re_s, im_s = ln.split()
        rho[int(i_s), int(j_s)] = float(re_s) + 1j * float(im_s)
    return rho


def save_density_matrix(path, rho):
    _io.atomic_write_text(path, density_matrix_to_text(rho))


def load_density_matrix(path):
    with open(path, encoding="utf-8") as fh:
        return density_matrix_from_text(fh.read())


def counts_to_csv_text(records, metadata=None):
    buf = _stdio.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key} = {value}\n")
    writer = _csv.writer(buf)
    writer.writerow(["setting", "shots", "c_signal", "c_bright", "c_dark"])
    for r in records:
        writer.writerow(
            [
                r.setting,
                r.shots,
                _io.format_float(r.c_signal),
                _io.format_float(r.c_bright),
                _io.format_float(r.c_dark),
            ]
        )
    return buf.getvalue()


def counts_to_csv(path, records, metadata=None):
    _io.atomic_write_text(path, counts_to_csv_text(records, metadata))


def counts_from_csv(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    for row in _csv.reader(rows[1:]):
        if not row:
            continue
        records.append(
            CountsRecord(
                setting=row[0],
                shots=int(row[1]),
                c_signal=float(row[2]),
                c_bright=float(row[3]),
                c_dark=float(row[4]),
            )
        )
    return records
