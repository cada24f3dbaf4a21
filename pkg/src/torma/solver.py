"""Newton-continuity solver, adjoint kernel, and Gauduchon conformal factor.

The continuity family raises t from 0 to 1 in

    det gt(u_t) = e^{t F + b_t} det(ref),

warm-starting damped Newton at each step. Each Newton step solves the
augmented linear system

    [ L(du) - db = -r ;  mean(du) = 0 ]

by GMRES, preconditioned with the exact inverse of the constant-coefficient
(node-averaged) second-order part, which is diagonal in Fourier space.
Positivity of gt is maintained by step damping only; the equation is never
modified.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse.linalg as spla

from . import equations as eq
from . import geometry as geo
from . import grid as gr
from . import hermitian as ha
from .errors import PositivityError, SolverError, ValidationError


@dataclass
class SolverConfig:
    """Newton/continuity tuning knobs."""

    newton_tol: float = 1e-11
    max_newton: int = 40
    continuity_steps: tuple = (0.0, 0.5, 1.0)
    min_t_step: float = 1.0 / 256.0
    min_damping: float = 2.0 ** -16
    linear_tol: float = 1e-10
    linear_restart: int = 60
    linear_maxiter: int = 1200
    stagnation_window: int = 5
    stagnation_factor: float = 0.5

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValidationError("newton_tol must be positive")
        steps = tuple(float(t) for t in self.continuity_steps)
        if steps[0] != 0.0 or steps[-1] != 1.0 or any(
            b <= a for a, b in zip(steps, steps[1:])
        ):
            raise ValidationError(
                "continuity schedule must increase strictly from 0 to 1"
            )
        self.continuity_steps = steps


@dataclass
class SolveReport:
    """Outcome of a continuity solve; records hold one dict per Newton iterate."""

    state: eq.SolveState
    converged: bool
    residual_sup: float
    positivity_margin: float
    residual_sup_full: float = np.inf
    t_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    b_history: list = field(default_factory=list)
    records: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    message: str = ""

    def u_sup_normalized(self):
        return self.state.normalized_sup()

    def write_records(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# spectral constant-coefficient preconditioner


def _mode_multipliers(grid):
    """Fourier multipliers of d_holo / d_antiholo per complex coordinate."""
    hol, antih = [], []
    for j in range(grid.n):
        kx = np.zeros(grid.sizes)
        ky = np.zeros(grid.sizes)
        for axis, target in ((2 * j, kx), (2 * j + 1, ky)):
            size = grid.sizes[axis]
            if size == 1:
                continue
            k = np.fft.fftfreq(size, d=1.0 / size)
            if size % 2 == 0:
                k[size // 2] = 0.0
            shape = [1] * (2 * grid.n)
            shape[axis] = size
            target += k.reshape(shape)
        hol.append(1j * np.pi * (kx - 1j * ky))
        antih.append(1j * np.pi * (kx + 1j * ky))
    return hol, antih


class SpectralPreconditioner:
    """Exact inverse of v -> sum C[i,j] d_j d_ibar v - beta for constant C.

    Solves [Lbar(v) - beta = rho ; mean(v) = s] one Fourier mode at a time;
    used as the right preconditioner of the augmented Newton system and, with
    a shift, of the adjoint-kernel iteration.
    """

    def __init__(self, grid, coeff_mean, shift=0.0):
        self.grid = grid
        hol, antih = _mode_multipliers(grid)
        symbol = np.zeros(grid.sizes, dtype=np.complex128)
        n = grid.n
        for i in range(n):
            for j in range(n):
                symbol += coeff_mean[i, j] * hol[j] * antih[i]
        self.symbol = symbol - shift
        self.zero = tuple(0 for _ in grid.sizes)
        # modes annihilated by the derivative multipliers (k = 0, Nyquist) pass
        # through the preconditioner unchanged
        scale = max(np.max(np.abs(symbol)), 1.0)
        self.safe_symbol = np.where(
            np.abs(self.symbol) < 1e-13 * scale, 1.0, self.symbol
        )

    def solve_field(self, rho):
        """(Lbar - shift)^{-1} rho, zero mode passed through the shift."""
        rho_hat = scipy.fft.fftn(rho, axes=self.grid.active_axes)
        rho_hat /= self.safe_symbol
        return scipy.fft.ifftn(rho_hat, axes=self.grid.active_axes)

    def solve_augmented(self, rho, mean_target=0.0):
        """Solve Lbar(v) - beta = rho with mean(v) = mean_target."""
        rho_hat = scipy.fft.fftn(rho, axes=self.grid.active_axes)
        beta = -(rho_hat[self.zero].real / self.grid.num_nodes)
        rho_hat /= self.safe_symbol
        rho_hat[self.zero] = mean_target * self.grid.num_nodes
        v = scipy.fft.ifftn(rho_hat, axes=self.grid.active_axes)
        return v, beta


def _augmented_solve(grid, apply_fn, rhs, precond, cfg):
    """GMRES on [L(v) - beta = rhs ; mean(v) = 0] over packed real vectors.

    Solved in the resolved (Nyquist-free) subspace: the spectral Jacobian is
    singular on Nyquist modes, so both the operator and the right-hand side
    are projected there.
    """
    size = grid.num_nodes
    rhs = gr.drop_nyquist(grid, rhs)

    def matvec(x):
        v = x[:size].reshape(grid.sizes).astype(np.complex128)
        beta = x[size]
        out = gr.drop_nyquist(grid, apply_fn(v)) - beta
        return np.concatenate([out.real.ravel(), [np.mean(v).real]])

    def psolve(x):
        rho = x[:size].reshape(grid.sizes)
        v, beta = precond.solve_augmented(rho, mean_target=x[size])
        return np.concatenate([v.real.ravel(), [beta]])

    op = spla.LinearOperator((size + 1, size + 1), matvec=matvec, dtype=np.float64)
    m_op = spla.LinearOperator((size + 1, size + 1), matvec=psolve, dtype=np.float64)
    b = np.concatenate([rhs.real.ravel(), [0.0]])
    maxiter = max(1, cfg.linear_maxiter // cfg.linear_restart)
    # absolute floor: once the linear residual is far below the Newton
    # tolerance, further digits cannot matter
    x, info = spla.gmres(
        op, b, rtol=cfg.linear_tol, atol=1e-3 * cfg.newton_tol,
        restart=cfg.linear_restart, maxiter=maxiter, M=m_op,
    )
    if info != 0:
        raise SolverError(f"inner GMRES did not reach tolerance (info={info})")
    v = x[:size].reshape(grid.sizes).astype(np.complex128)
    return v - np.mean(v), float(x[size])


# ---------------------------------------------------------------------------
# Newton and continuity


def _residual_state(spec, state):
    """(gt, margin, residual, projected sup-norm).

    Newton convergence and step acceptance are measured on the resolved
    (Nyquist-free) part of the residual: the collocation system is solvable
    only there, the complement being pure aliasing of the nonlinearity. The
    full-field residual is reported separately in SolveReport.
    """
    gt = eq.tilde_metric(spec, state.u)
    margin = eq.positivity_margin(gt)
    if margin <= 0.0:
        raise PositivityError(f"tilde metric not positive (min eig {margin:.3e})")
    r = eq.ma_residual(spec, state, gt=gt, check_positive=False)
    rsup = gr.sup_norm(gr.drop_nyquist(spec.grid, r))
    return gt, margin, r, rsup


def newton_step(spec, state, cfg=None, gt=None, residual=None):
    """One damped Newton update of (u, b); returns the new state and step info.

    The largest damping factor in {1, 1/2, 1/4, ...} that keeps gt positive and
    reduces the residual sup-norm is applied; no eigenvalue clipping ever.
    """
    cfg = cfg or SolverConfig()
    if gt is None or residual is None:
        gt, _, residual, rsup = _residual_state(spec, state)
    else:
        rsup = gr.sup_norm(gr.drop_nyquist(spec.grid, residual))
    if rsup < cfg.newton_tol:
        return state, {"damping": 0.0, "gt": gt, "residual": residual}
    lin = eq.Linearization(spec, state, gt=gt)
    coeff_mean = np.mean(lin.coeff.reshape(-1, spec.n, spec.n), axis=0)
    precond = SpectralPreconditioner(spec.grid, coeff_mean)
    du, db = _augmented_solve(spec.grid, lin.apply, -residual, precond, cfg)

    damping = 1.0
    while damping >= cfg.min_damping:
        trial = eq.SolveState(u=state.u + damping * du, b=state.b + damping * db,
                              t=state.t)
        trial.u -= np.mean(trial.u)
        gt_trial = eq.tilde_metric(spec, trial.u)
        if eq.positivity_margin(gt_trial) > 0.0:
            r_trial = eq.ma_residual(spec, trial, gt=gt_trial, check_positive=False)
            if gr.sup_norm(gr.drop_nyquist(spec.grid, r_trial)) < rsup:
                return trial, {
                    "damping": damping,
                    "gt": gt_trial,
                    "residual": r_trial,
                }
        damping *= 0.5
    raise PositivityError(
        "damping could not keep the metric positive while reducing the residual"
    )


def _newton_solve(spec, state, cfg, records, t):
    """Newton iteration at fixed t; state is mutated to convergence."""
    history = []
    for it in range(cfg.max_newton):
        gt, margin, r, rsup = _residual_state(spec, state)
        history.append(rsup)
        records.append({
            "t": t, "iter": it, "residual_sup": rsup, "b": float(state.b),
            "positivity_margin": margin, "damping": None,
        })
        if rsup < cfg.newton_tol:
            return history
        if (
            len(history) > cfg.stagnation_window
            and history[-1] > cfg.stagnation_factor * history[-1 - cfg.stagnation_window]
        ):
            raise SolverError(
                f"Newton stagnation at t={t:.4f}: residual "
                f"{history[-1 - cfg.stagnation_window]:.3e} -> {history[-1]:.3e} "
                f"over {cfg.stagnation_window} steps"
            )
        new_state, info = newton_step(spec, state, cfg, gt=gt, residual=r)
        state.u = new_state.u
        state.b = new_state.b
        records[-1]["damping"] = info["damping"]
    raise SolverError(f"Newton budget exhausted at t={t:.4f} (residual {history[-1]:.3e})")


def initial_state(spec, u0=None, t=0.0):
    """Admissible start: mean-zero u0 (default 0) and the mean-matching b."""
    if u0 is None:
        u0 = np.zeros(spec.grid.sizes, dtype=np.complex128)
    u0 = u0.astype(np.complex128) - np.mean(u0)
    state = eq.SolveState(u=u0, b=0.0, t=t)
    gt = eq.tilde_metric(spec, u0)
    margin = eq.positivity_margin(gt)
    if margin <= 0.0:
        raise ValidationError(
            f"initial potential is not admissible (min eig {margin:.3e})"
        )
    r = eq.ma_residual(spec, state, gt=gt, check_positive=False)
    state.b = float(np.mean(r.real))
    return state


def continuity_solve(spec, cfg=None, u0=None):
    """March t through the schedule with warm starts and adaptive halving.

    Returns a SolveReport at t = 1; on unrecoverable failure raises SolverError
    with the last good report attached as exc.report.
    """
    cfg = cfg or SolverConfig()
    records = []
    state = initial_state(spec, u0)
    report = SolveReport(
        state=state, converged=False, residual_sup=np.inf, positivity_margin=0.0
    )
    report.records = records

    def fail(exc, t_good):
        gt = eq.tilde_metric(spec, state.u)
        r = eq.ma_residual(spec, state, gt=gt, check_positive=False)
        report.residual_sup = gr.sup_norm(gr.drop_nyquist(spec.grid, r))
        report.residual_sup_full = gr.sup_norm(r)
        report.positivity_margin = eq.positivity_margin(gt)
        report.message = f"stopped at t={t_good:.4f}: {exc}"
        err = SolverError(report.message)
        err.report = report
        return err

    # solve the t = 0 member (trivial when the residual at u0 is constant)
    try:
        history = _newton_solve(spec, state, cfg, records, cfg.continuity_steps[0])
    except (SolverError, PositivityError) as exc:
        raise fail(exc, 0.0) from exc
    report.t_history.append(0.0)
    report.b_history.append(state.b)

    t_current = 0.0
    for t_target in cfg.continuity_steps[1:]:
        while t_current < t_target - 1e-14:
            t_try = t_target
            while True:
                saved_u, saved_b = state.u.copy(), state.b
                state.t = t_try
                try:
                    history = _newton_solve(spec, state, cfg, records, t_try)
                    break
                except (SolverError, PositivityError) as exc:
                    state.u, state.b = saved_u, saved_b
                    if t_try - t_current <= cfg.min_t_step + 1e-14:
                        state.t = t_current
                        raise fail(exc, t_current) from exc
                    t_try = t_current + 0.5 * (t_try - t_current)
            t_current = t_try
            report.t_history.append(t_current)
            report.b_history.append(state.b)
            report.residual_history = history

    gt = eq.tilde_metric(spec, state.u)
    r = eq.ma_residual(spec, state, gt=gt, check_positive=False)
    report.converged = True
    report.residual_sup = gr.sup_norm(gr.drop_nyquist(spec.grid, r))
    report.residual_sup_full = gr.sup_norm(r)
    report.positivity_margin = eq.positivity_margin(gt)
    report.residual_history = history
    return report


# ---------------------------------------------------------------------------
# adjoint kernel


@dataclass
class AdjointKernel:
    """Positive kernel function of L^* with sigma = log f; f integrates to 1
    against the tilde-metric volume."""

    f: np.ndarray
    sigma: np.ndarray
    residual_sup: float
    iterations: int


def adjoint_kernel(spec, state, tol=1e-9, max_iterations=60, cfg=None):
    """Kernel of the adjoint linearization by shifted inverse power iteration.

    The adjoint is taken in the discrete L^2 pairing weighted by the current
    tilde-metric volume form. Raises SolverError if the iteration stalls or the
    kernel function changes sign (analytically impossible).
    """
    cfg = cfg or SolverConfig()
    lin = eq.Linearization(spec, state)
    grid = spec.grid
    weights = gr.volume_weights(grid, lin.gt)
    coeff_mean = np.mean(lin.coeff.reshape(-1, spec.n, spec.n), axis=0)
    # the target eigenvalue is 0 and the rest of the spectrum sits below
    # -pi^2 lambda_min(coeff); a small positive shift gives inverse iteration
    # a contraction factor of roughly gap/shift per step
    gap = np.pi ** 2 * float(np.min(np.linalg.eigvalsh(coeff_mean).real))
    shift = 0.05 * gap
    precond = SpectralPreconditioner(grid, coeff_mean, shift=shift)
    size = grid.num_nodes

    def matvec(x):
        v = x.reshape(grid.sizes)
        out = lin.apply_transpose(v, weights) - shift * v
        return out.real.ravel()

    def psolve(x):
        # L* = W^{-1} L^T W, so conjugate the constant-coefficient inverse by
        # the volume weights: (L* - mu)^{-1} ~ W^{-1} (Lbar - mu)^{-1} W
        rho = x.reshape(grid.sizes) * weights
        return (precond.solve_field(rho).real / weights).ravel()

    op = spla.LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    m_op = spla.LinearOperator((size, size), matvec=psolve, dtype=np.float64)

    f = np.ones(grid.sizes)
    residual = np.inf
    for it in range(1, max_iterations + 1):
        rhs = f.ravel()
        x, info = spla.gmres(
            op, rhs, rtol=1e-12, atol=0.0, restart=cfg.linear_restart,
            maxiter=max(1, cfg.linear_maxiter // cfg.linear_restart), M=m_op,
        )
        if info != 0:
            raise SolverError(f"adjoint-kernel inner solve failed (info={info})")
        f = x.reshape(grid.sizes)
        f = f / np.max(np.abs(f))
        residual = gr.sup_norm(lin.apply_transpose(f, weights))
        if residual < tol:
            break
    else:
        raise SolverError(
            f"adjoint-kernel power iteration did not converge (|L*f| = {residual:.3e})"
        )
    if np.mean(f) < 0:
        f = -f
    if f.min() <= 0.0:
        raise SolverError(
            "adjoint kernel changes sign on the grid; refine the discretization"
        )
    f = f / float(np.sum(f * weights))
    return AdjointKernel(
        f=f, sigma=np.log(f), residual_sup=residual, iterations=it
    )


# ---------------------------------------------------------------------------
# Gauduchon conformal factor


def _gauduchon_residual_parts(grid, g, ginv, dbar_g, rho0, tau):
    """N(tau)/(n-1)! and the data needed for its linearization."""
    n = grid.n
    hess = gr.hessian_complex(grid, tau)
    dtau = gr.holo_gradient(grid, tau)
    grad_sq = np.einsum("...j,...ji,...i->...", np.conj(dtau), ginv, dtau)
    lap = np.einsum("...ij,...ji->...", ginv, hess)
    cross = np.zeros(grid.sizes, dtype=np.complex128)
    for k in range(n):
        slot = np.zeros(grid.sizes + (n, n), dtype=np.complex128)
        slot[..., :, k] = dtau
        cross += ha.s2(g, slot, dbar_g[..., k, :, :], ginv)
    # [i d(tau) ^ dbar(omega^{n-1})]/dV = (n-1)(n-2)! sum_k S2 = (n-1)! sum_k S2
    resid = lap.real + grad_sq.real + 2.0 * cross.real + rho0
    return resid, dtau


def gauduchon_factor(grid, omega, tol=1e-9, max_newton=30, cfg=None):
    """Mean-zero sigma with e^sigma omega Gauduchon, by Newton on the defect.

    Works on tau = (n-1) sigma: the defect scalar of e^tau omega^{n-1} is

        N(tau)/(n-1)! = lap_g tau + |d tau|^2_g
                        + 2 Re sum_k S2(dtau x e_k, d_kbar g) + rho_0/(n-1)!

    solved with the same augmented GMRES machinery as the main solver (the
    scalar unknown absorbs the one-dimensional compatibility of the system).
    """
    cfg = cfg or SolverConfig()
    ha.require_positive(omega)
    n = grid.n
    ginv = np.linalg.inv(omega)
    dbar_g = geo.metric_dbar_tensor(grid, omega)
    ddbar_g = geo.metric_ddbar_tensor(grid, omega, dbar_g)
    rho0 = geo.gauduchon_scalar(grid, omega, dbar_g, ddbar_g) / math.factorial(n - 1)
    coeff_mean = np.mean(ginv.reshape(-1, n, n), axis=0)
    precond = SpectralPreconditioner(grid, coeff_mean)

    def projected_sup(resid):
        p = gr.drop_nyquist(grid, resid)
        return gr.sup_norm(p - np.mean(p))

    tau = np.zeros(grid.sizes, dtype=np.complex128)
    for it in range(max_newton):
        resid, dtau = _gauduchon_residual_parts(grid, omega, ginv, dbar_g, rho0, tau)
        rsup = projected_sup(resid)
        if rsup < tol:
            break

        def jac(v, dtau=dtau):
            hess_v = gr.hessian_complex(grid, v)
            dv = gr.holo_gradient(grid, v)
            lap_v = np.einsum("...ij,...ji->...", ginv, hess_v)
            cross_pair = np.einsum("...j,...ji,...i->...", np.conj(dtau), ginv, dv)
            cross_lin = np.zeros(grid.sizes, dtype=np.complex128)
            for k in range(n):
                slot = np.zeros(grid.sizes + (n, n), dtype=np.complex128)
                slot[..., :, k] = dv
                cross_lin += ha.s2(omega, slot, dbar_g[..., k, :, :], ginv)
            return lap_v.real + 2.0 * cross_pair.real + 2.0 * cross_lin.real

        dtau_step, _ = _augmented_solve(grid, jac, -resid, precond, cfg)
        damping = 1.0
        while damping >= cfg.min_damping:
            trial = tau + damping * dtau_step
            r_trial, _ = _gauduchon_residual_parts(grid, omega, ginv, dbar_g, rho0, trial)
            if projected_sup(r_trial) < rsup:
                tau = trial - np.mean(trial)
                break
            damping *= 0.5
        else:
            raise SolverError("Gauduchon factor Newton could not reduce the defect")
    else:
        raise SolverError(
            f"Gauduchon factor solve stalled above tolerance (defect {rsup:.3e})"
        )
    sigma = (tau / (n - 1)).real
    sigma = sigma - np.mean(sigma)
    conformal = np.exp(sigma)[..., None, None] * omega
    check = geo.metric_defects(grid, conformal).gauduchon
    if not check < max(10.0 * tol, 1e-7):
        raise SolverError(
            f"post-validation failed: Gauduchon defect {check:.3e} after the "
            "solve converged; the defect evaluation is resolution-limited for "
            "this metric, refine the grid"
        )
    return sigma.astype(np.complex128)
