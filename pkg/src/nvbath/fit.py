"""Least-squares fitting: Gaussian decay constants and hyperfine calibration.

Both fits share a small damped least-squares (Levenberg-Marquardt)
refiner with Fletcher scaling.  Hyperfine calibration wraps it in a
coarse grid stage because the residual in A_zz is an oscillatory
resonance comb where pure local descent strands in side minima.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, kernels, model

_LM_MAX_ITER = 500
_LM_LAMBDA0 = 1e-3
_LM_LAMBDA_MAX = 1e12
_GTOL = 1e-12
_XTOL = 1e-12
_UNBOUNDED_FACTOR = 50.0  # fitted decay beyond this multiple of the span is unbounded


class FitError(RuntimeError):
    """Fit failed; message carries the diagnostic, result the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FitResult:
    params: dict
    sigmas: dict
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""

    def __post_init__(self):
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be nonnegative")
        if self.converged and any(s < 0 for s in self.sigmas.values()):
            raise ValueError("sigmas must be nonnegative when converged")

    def to_text(self):
        lines = []
        for name, value in self.params.items():
            lines.append(f"{name} = {format_uncertainty(value, self.sigmas.get(name, 0.0))}")
        lines.append(f"residual_norm = {self.residual_norm:.9e}")
        lines.append(f"converged = {self.converged}")
        lines.append(f"iterations = {self.iterations}")
        if self.message:
            lines.append(f"message = {self.message}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps(
            {
                "params": self.params,
                "sigmas": self.sigmas,
                "residual_norm": self.residual_norm,
                "converged": self.converged,
                "iterations": self.iterations,
                "message": self.message,
            },
            indent=2,
            sort_keys=True,
        )


def format_uncertainty(value, sigma):
    """Parenthesis notation: uncertainty in units of the last displayed digit."""
    if not math.isfinite(sigma) or sigma <= 0:
        return f"{value:.6g}"
    exp = int(math.floor(math.log10(sigma)))
    digit = round(sigma / 10.0**exp)
    if digit == 10:
        digit = 1
        exp += 1
    if exp >= 0:
        scale = 10.0**exp
        return f"{round(value / scale) * scale:.0f}({digit * int(scale):d})"
    return f"{value:.{-exp}f}({digit})"


def _levenberg_marquardt(residual, jacobian, x0, max_iter=_LM_MAX_ITER):
    """Minimize ||residual(x)||^2; returns (x, jtj, cost, iterations, converged)."""
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    cost = float(r @ r)
    lam = _LM_LAMBDA0
    jac = jacobian(x)
    for it in range(1, max_iter + 1):
        g = jac.T @ r
        jtj = jac.T @ jac
        if np.max(np.abs(g)) < _GTOL:
            return x, jtj, cost, it, True
        damping = np.diag(np.maximum(np.diag(jtj), 1e-30))
        step = None
        while lam <= _LM_LAMBDA_MAX:
            try:
                trial_step = np.linalg.solve(jtj + lam * damping, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = x + trial_step
            rt = residual(trial)
            ct = float(rt @ rt)
            if ct < cost:
                x, r, cost, step = trial, rt, ct, trial_step
                lam = max(lam / 3.0, 1e-14)
                break
            lam *= 10.0
        if step is None:
            # no descent direction left: either converged or degenerate
            return x, jtj, cost, it, bool(np.max(np.abs(g)) < 1e-8 * (1.0 + cost))
        jac = jacobian(x)
        if np.linalg.norm(step) < _XTOL * (1.0 + np.linalg.norm(x)):
            return x, jac.T @ jac, cost, it, True
    return x, jac.T @ jac, cost, max_iter, False


def _sigmas_from_curvature(jtj, cost, n_points, n_params):
    dof = max(n_points - n_params, 1)
    try:
        cov = np.linalg.inv(jtj) * (cost / dof)
    except np.linalg.LinAlgError:
        return np.full(n_params, np.inf)
    return np.sqrt(np.maximum(np.diag(cov), 0.0))


def _as_xy(t, y):
    if y is None:
        pts = np.asarray(t, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("expected a sequence of (t, y) pairs")
        t, y = pts[:, 0], pts[:, 1]
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-d arrays of equal length")
    return t, y


def fit_gaussian_decay(t, y=None, with_floor=False):
    """Fit y = a*exp(-(t/T)^2) (+ floor), returning a FitResult.

    The decay constant enters squared, so its sign is a gauge choice;
    the reported T is positive.  A trace with no visible decay drives
    T beyond any bound and raises a FitError diagnostic.
    """
    t, y = _as_xy(t, y)
    if t.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")

    span = float(t.max() - t.min()) or 1.0
    floor0 = float(y.min()) if with_floor else 0.0
    a0 = float(y.max()) - floor0
    if a0 <= 0:
        a0 = max(abs(float(y.max())), 1e-3)
    drop = np.nonzero(y - floor0 <= a0 / np.e)[0]
    t0 = float(t[drop[0]]) if drop.size else float(t.max())
    t0 = max(t0, span / 20.0)

    def unpack(x):
        return (x[0], x[1], x[2]) if with_floor else (x[0], x[1], 0.0)

    def residual(x):
        a, big_t, c = unpack(x)
        return a * np.exp(-((t / big_t) ** 2)) + c - y

    def jacobian(x):
        a, big_t, _ = unpack(x)
        e = np.exp(-((t / big_t) ** 2))
        cols = [e, a * e * 2.0 * t**2 / big_t**3]
        if with_floor:
            cols.append(np.ones_like(t))
        return np.column_stack(cols)

    x0 = [a0, t0] + ([floor0] if with_floor else [])
    x, jtj, cost, iters, converged = _levenberg_marquardt(residual, jacobian, x0)
    names = ["a", "t_decay"] + (["floor"] if with_floor else [])
    sig = _sigmas_from_curvature(jtj, cost, t.size, len(names))
    params = dict(zip(names, x))
    params["t_decay"] = abs(params["t_decay"])
    result = FitResult(
        params=params,
        sigmas=dict(zip(names, np.abs(sig))),
        residual_norm=float(np.sqrt(cost)),
        converged=converged,
        iterations=iters,
    )
    if params["t_decay"] > _UNBOUNDED_FACTOR * span:
        raise FitError(
            f"decay constant unbounded: t_decay={params['t_decay']:.3g} exceeds "
            f"{_UNBOUNDED_FACTOR:g}x the sampled span {span:.3g} (trace has no decay)",
            result=result,
        )
    if not converged:
        raise FitError(
            f"no convergence after {iters} damped-least-squares iterations "
            f"(residual {result.residual_norm:.3e})",
            result=result,
        )
    return result


GRID_POINTS = 41


def _single_carbon_w(constants, a_zz, a_xz, taus, n):
    carbon = model.CarbonParams(label="fit", a_zz=float(a_zz), a_xz=float(a_xz))
    wz1, wx1, wl = dynamics._kernel_args([carbon], constants)
    return kernels.coherence_scan(wz1, wx1, wl, taus, n)


def calibrate_hyperfine(measured, k_index, bounds, fixed_others=(), constants=None,
                        grid_points=GRID_POINTS, threads=1):
    """Recover (A_zz, A_xz) of one carbon from a measured coherence scan.

    Coarse grid over the bounds box, then damped local refinement of
    sum_i (W_sim(tau_i) - W_meas(tau_i))^2 with all other carbons fixed.
    The refinement Jacobian is by central differences.  Raises FitError
    when the best grid point sits on the bounds boundary or when the
    residual landscape is degenerate.  ``threads`` caps the worker pool
    for the grid stage (results are identical for any thread count).
    """
    if constants is None:
        constants = model.PhysicalConstants()
    (azz_lo, azz_hi), (axz_lo, axz_hi) = bounds
    if not (np.isfinite([azz_lo, azz_hi, axz_lo, axz_hi]).all()
            and azz_lo < azz_hi and axz_lo < axz_hi):
        raise ValueError("bounds must be finite nondegenerate intervals")
    if measured.x_kind != "tau":
        raise ValueError("calibration expects a tau-scan trace")
    taus = measured.x
    n = measured.n
    w_meas = measured.w

    if fixed_others:
        wz1, wx1, wl = dynamics._kernel_args(list(fixed_others), constants)
        w_fixed = kernels.coherence_scan(wz1, wx1, wl, taus, n)
    else:
        w_fixed = np.ones_like(taus)

    azz_grid = np.linspace(azz_lo, azz_hi, grid_points)
    axz_grid = np.linspace(axz_lo, axz_hi, grid_points)
    costs = np.empty((grid_points, grid_points))

    def _grid_row(i):
        for j, axz in enumerate(axz_grid):
            d = w_fixed * _single_carbon_w(constants, azz_grid[i], axz, taus, n) - w_meas
            costs[i, j] = d @ d

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(_grid_row, range(grid_points)))
    else:
        for i in range(grid_points):
            _grid_row(i)
    best = np.unravel_index(np.argmin(costs), costs.shape)
    spread = costs.max() - costs.min()
    if spread < 1e-12 * max(costs.max(), 1.0):
        raise FitError("degenerate fit: residual is flat over the entire bounds box")
    if best[0] in (0, grid_points - 1) or best[1] in (0, grid_points - 1):
        raise FitError(
            "boundary hit: best grid point (%.6g, %.6g) kHz lies on the bounds box"
            % (azz_grid[best[0]], axz_grid[best[1]])
        )

    scale = np.array([azz_grid[1] - azz_grid[0], axz_grid[1] - axz_grid[0]])

    def residual(x):
        return w_fixed * _single_carbon_w(constants, x[0], x[1], taus, n) - w_meas

    def jacobian(x):
        cols = []
        for k in range(2):
            h = 1e-6 * scale[k]
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            cols.append((residual(xp) - residual(xm)) / (2.0 * h))
        return np.column_stack(cols)

    x0 = np.array([azz_grid[best[0]], axz_grid[best[1]]])
    grid_cost = float(costs[best])
    x, jtj, cost, iters, converged = _levenberg_marquardt(residual, jacobian, x0)
    if cost > grid_cost + 1e-15:
        x, cost = x0, grid_cost  # refinement must never regress past the grid
    cond = np.linalg.cond(jtj)
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(
            f"degenerate fit: curvature condition number {cond:.3g} "
            "(one hyperfine direction is unconstrained by the trace)"
        )
    sig = _sigmas_from_curvature(jtj, cost, taus.size, 2)
    return FitResult(
        params={"a_zz": float(x[0]), "a_xz": float(x[1])},
        sigmas={"a_zz": float(sig[0]), "a_xz": float(sig[1])},
        residual_norm=float(np.sqrt(cost)),
        converged=converged,
        iterations=iters,
        message=f"carbon slot {k_index}, grid {grid_points}x{grid_points}",
    )
