"""Assembly of the two Monge-Ampere operators, their residuals and linearizations.

Variant PSI solves, in Hodge-dual (metric) form,

    gt = h + ((lap u) g - i ddbar u) / (n-1),     det gt = e^{t F + b} det(ref),

the dual of det(omega_0^{n-1} + i ddbar u ^ omega^{n-2}) = e^{F+b} det(omega^{n-1}).
Variant PHI adds the first-order torsion tensor Z = star E with
E = Re(i du ^ dbar(omega^{n-2})) / (n-1)!, the dual form of the
torsion-augmented (n-1,n-1) operator. ref is det(omega) or det(omega_h)
according to rhs_volume; omega^n is the default, the omega_h^n family is
selectable per run.

The unknown pair is (u, b): u is kept mean-zero during iteration and b is an
explicit scalar; u only enters through derivatives so shifting u is a gauge
move that leaves b untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import geometry as geo
from . import grid as gr
from . import hermitian as ha
from .errors import PositivityError, ValidationError


class Variant(Enum):
    PSI = "psi"
    PHI = "phi"


class RhsVolume(Enum):
    OMEGA_N = "omega_n"
    OMEGA_H_N = "omega_h_n"


@dataclass
class ProblemSpec:
    """Equation data: variant, reference metrics, datum F, volume convention."""

    grid: gr.TorusGrid
    variant: Variant
    omega0: np.ndarray
    omega: np.ndarray
    F: np.ndarray
    rhs_volume: RhsVolume = RhsVolume.OMEGA_N

    def __post_init__(self):
        n = self.grid.n
        self.grid.check_field(self.omega0, (n, n))
        self.grid.check_field(self.omega, (n, n))
        self.grid.check_field(self.F, ())
        ha.require_positive(self.omega0, "omega_0")
        ha.require_positive(self.omega, "omega")
        if self.variant is Variant.PHI and n < 3:
            raise ValidationError("the PHI variant needs n >= 3")
        if gr.sup_norm(np.imag(self.F)) > 1e-10:
            raise ValidationError("datum F must be real")
        self.F = np.ascontiguousarray(self.F.real)
        self._cache = {}

    @property
    def n(self):
        return self.grid.n

    def _cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def omega_inv(self):
        return self._cached("omega_inv", lambda: np.linalg.inv(self.omega))

    @property
    def omega_h(self):
        """omega_h = (1/(n-1)!) star(omega_0^{n-1}), a positive Hermitian field."""
        return self._cached("omega_h", lambda: ha.star_power(self.omega, self.omega0))

    @property
    def dbar_omega(self):
        return self._cached("dbar_omega", lambda: geo.metric_dbar_tensor(self.grid, self.omega))

    @property
    def log_det_ref(self):
        def build():
            ref = self.omega if self.rhs_volume is RhsVolume.OMEGA_N else self.omega_h
            return np.log(np.linalg.det(ref).real)

        return self._cached("log_det_ref", build)


@dataclass
class SolveState:
    """Current potential u (mean-zero), volume constant b, continuity parameter t."""

    u: np.ndarray
    b: float
    t: float = 1.0

    def normalized_sup(self):
        """Copy of u shifted to the reporting normalization sup u = 0."""
        return self.u - np.max(self.u.real)


def omega_h(spec):
    return spec.omega_h


def _e_raw(g, du, dbar_omega, ginv):
    """Complex-linear part M(du) of the E dual: Z = Re(M)/(n-1)."""
    n = g.shape[-1]
    m = np.zeros_like(g)
    for k in range(n):
        slot = np.zeros_like(g)
        slot[..., :, k] = du
        m += ha.b2(g, slot, dbar_omega[..., k, :, :], ginv)
    return m


def e_term_from_parts(g, du, dbar_omega, ginv=None):
    """Torsion tensor Z = star E and its trace H from pointwise ingredients.

    du is the holomorphic gradient field (..., n); dbar_omega the tensor
    d_kbar g_{i jbar}. Decomposing i du ^ dbar(omega) into (1,1)-slot wedges
    gives star E = Re( sum_k B2(du x e_k, d_kbar g) ) / (n-1).
    """
    n = g.shape[-1]
    ginv = np.linalg.inv(g) if ginv is None else ginv
    z = ha.hermitize(_e_raw(g, du, dbar_omega, ginv)) / (n - 1)
    h_trace = np.einsum("...ij,...ji->...", ginv, z).real
    return z, h_trace


def e_term(spec, u):
    """(Z, H) for the PHI variant; linear in du, zero for constant omega."""
    if spec.variant is not Variant.PHI:
        raise ValidationError("e_term is defined for the PHI variant only")
    du = gr.holo_gradient(spec.grid, u)
    return e_term_from_parts(spec.omega, du, spec.dbar_omega, spec.omega_inv)


def tilde_metric(spec, u, hess=None):
    """gt = omega_h + ((lap u) omega - i ddbar u)/(n-1) (+ Z for PHI).

    Not guaranteed positive; callers query positivity themselves.
    """
    n = spec.n
    if hess is None:
        hess = gr.hessian_complex(spec.grid, u)
    lap = np.einsum("...ij,...ji->...", spec.omega_inv, hess)
    gt = spec.omega_h + (lap[..., None, None] * spec.omega - hess) / (n - 1)
    if spec.variant is Variant.PHI:
        z, _ = e_term(spec, u)
        gt = gt + z
    return ha.hermitize(gt)


def positivity_margin(gt):
    """Smallest eigenvalue of gt over all nodes."""
    return ha.min_eigenvalue(gt)


def violating_nodes(gt):
    lam = np.linalg.eigvalsh(gt)
    return np.argwhere(lam[..., 0] <= 0.0)


def ma_residual(spec, state, gt=None, check_positive=True):
    """Log-form residual r = log det gt - log det(ref) - t F - b."""
    if gt is None:
        gt = tilde_metric(spec, state.u)
    if check_positive:
        margin = positivity_margin(gt)
        if margin <= 0.0:
            bad = violating_nodes(gt)
            raise PositivityError(
                f"tilde metric not positive (min eigenvalue {margin:.3e} "
                f"at {len(bad)} nodes)",
                bad_nodes=bad,
            )
    return np.log(np.linalg.det(gt).real) - spec.log_det_ref - state.t * spec.F - state.b


def theta_coefficients(spec, state, gt=None):
    """Theta^{i jbar} = ((tr_gt g) g^{i jbar} - gt^{i jbar})/(n-1) > 0."""
    if gt is None:
        gt = tilde_metric(spec, state.u)
    if positivity_margin(gt) <= 0.0:
        raise PositivityError("tilde metric not positive; Theta undefined")
    n = spec.n
    gt_inv = np.linalg.inv(gt)
    tr = np.einsum("...ij,...ji->...", gt_inv, spec.omega).real
    raise_idx = lambda m: np.swapaxes(np.linalg.inv(m), -1, -2)
    return ha.hermitize(
        (tr[..., None, None] * raise_idx(spec.omega) - raise_idx(gt)) / (n - 1)
    )


class Linearization:
    """Derivative of u -> log det gt(u) at a state, with its discrete transpose.

    apply(v)    = Theta^{i jbar} v_{i jbar} + gt^{i jbar} Z(v)_{i jbar}
                = tr(gt^{-1} dgt(v)),     dgt(v) = ((lap v) g - Hess v)/(n-1) + Z(v)
    the PSI variant drops the Z part. The transpose is taken against the real
    weighted pairing <a, b>_w = sum a b w; spectral derivative matrices are
    exactly antisymmetric, so adjointness holds to roundoff.
    """

    def __init__(self, spec, state, gt=None):
        self.spec = spec
        self.state = state
        self.gt = tilde_metric(spec, state.u) if gt is None else gt
        margin = positivity_margin(self.gt)
        if margin <= 0.0:
            raise PositivityError(f"tilde metric not positive (min eig {margin:.3e})")
        n = spec.n
        self.gt_inv = np.linalg.inv(self.gt)
        tr = np.einsum("...ij,...ji->...", self.gt_inv, spec.omega)
        # second-order coefficients: apply = trace(C @ Hess v) + first order
        self.coeff = (tr[..., None, None] * spec.omega_inv - self.gt_inv) / (n - 1)
        self.first_order = None
        if spec.variant is Variant.PHI:
            # tr(gt^{-1} Z(v)) = Re sum_p a_p d_p v with M(v) the raw linear part
            a = np.zeros(spec.grid.sizes + (n,), dtype=np.complex128)
            unit = np.zeros(spec.grid.sizes + (n,), dtype=np.complex128)
            for p in range(n):
                unit[...] = 0.0
                unit[..., p] = 1.0
                m_p = _e_raw(spec.omega, unit, spec.dbar_omega, spec.omega_inv)
                a[..., p] = np.einsum("...ij,...ji->...", self.gt_inv, m_p) / (n - 1)
            self.first_order = a

    def apply(self, v):
        grid = self.spec.grid
        hess = gr.hessian_complex(grid, v)
        out = np.einsum("...ij,...ji->...", self.coeff, hess)
        if self.first_order is not None:
            dv = gr.holo_gradient(grid, v)
            out = out + np.einsum("...p,...p->...", self.first_order, dv).real
        return out.real

    def apply_transpose(self, f, weights):
        """L^T f under <a,b>_w; f and the result are real fields."""
        grid = self.spec.grid
        n = self.spec.n
        t = weights * f
        # trace(C @ Hess v) = sum_{p,q} C[q,p] d_p d_qbar v
        out = np.zeros(grid.sizes, dtype=np.complex128)
        for p in range(n):
            for q in range(n):
                out += gr.d_antiholo(grid, gr.d_holo(grid, self.coeff[..., q, p] * t, p), q)
        if self.first_order is not None:
            fo = np.zeros(grid.sizes, dtype=np.complex128)
            for p in range(n):
                fo += gr.d_holo(grid, self.first_order[..., p] * t, p)
            out -= fo.real
        return out.real / weights


def linearized_apply(spec, state, v):
    """One-shot L(v); build a Linearization object to amortize over many v."""
    return Linearization(spec, state).apply(v)


def eta_tensor(spec, state):
    """eta both ways: from u (with the PHI Z-correction) and from gt.

    eta = u_{i jbar} + (tr_g h) g - (n-1) h  [+ H g - (n-1) Z for PHI]
        = (tr_g gt) g - (n-1) gt.

    Returns (eta_from_u, eta_from_gt, max pointwise mismatch).
    """
    n = spec.n
    g = spec.omega
    h = spec.omega_h
    hess = gr.hessian_complex(spec.grid, state.u)
    tr_gh = np.einsum("...ij,...ji->...", spec.omega_inv, h)
    eta_u = hess + tr_gh[..., None, None] * g - (n - 1) * h
    if spec.variant is Variant.PHI:
        z, h_tr = e_term(spec, state.u)
        eta_u = eta_u + h_tr[..., None, None] * g - (n - 1) * z
    gt = tilde_metric(spec, state.u, hess=hess)
    tr_ggt = np.einsum("...ij,...ji->...", spec.omega_inv, gt)
    eta_gt = tr_ggt[..., None, None] * g - (n - 1) * gt
    eta_u = ha.hermitize(eta_u)
    eta_gt = ha.hermitize(eta_gt)
    mismatch = float(np.max(np.abs(eta_u - eta_gt)))
    return eta_u, eta_gt, mismatch


# ---------------------------------------------------------------------------
# field identities (trace / reconstruction), used by tests and diagnostics


def trace_identity_residual(spec, u):
    """sup | tr_w(gt) - tr_w(h) - lap u - [H] |."""
    gt = tilde_metric(spec, u)
    lap = gr.laplacian(spec.grid, spec.omega, u)
    lhs = np.einsum("...ij,...ji->...", spec.omega_inv, gt - spec.omega_h) - lap
    if spec.variant is Variant.PHI:
        _, h_tr = e_term(spec, u)
        lhs = lhs - h_tr
    return gr.sup_norm(lhs)


def reconstruction_identity_residual(spec, u):
    """sup-norm defect of the ddbar(u) reconstruction from (h, gt, omega).

    i ddbar u = (n-1) h + (tr_w gt - tr_w h - [H]) omega - (n-1) gt + [(n-1) Z]
    """
    n = spec.n
    gt = tilde_metric(spec, u)
    hess = gr.hessian_complex(spec.grid, u)
    tr_diff = np.einsum("...ij,...ji->...", spec.omega_inv, gt - spec.omega_h)
    rhs = (n - 1) * spec.omega_h + tr_diff[..., None, None] * spec.omega - (n - 1) * gt
    if spec.variant is Variant.PHI:
        z, h_tr = e_term(spec, u)
        rhs = rhs - h_tr[..., None, None] * spec.omega + (n - 1) * z
    return gr.sup_norm(hess - rhs)


def beta_closedness_scalar(spec, u):
    """ddbar defect of beta_u = i ddbar u ^ omega^{n-2} + Re(i du ^ dbar omega^{n-2}).

    beta_u = sigma ^ omega^{n-2} with sigma = Hess u + H omega - (n-1) Z, so the
    generic ddbar top-form scalar applies; the exact answer is zero, and the
    returned field measures the discrete defect of the whole assembly chain.
    """
    if spec.n < 3:
        raise ValidationError("beta_u needs n >= 3")
    hess = gr.hessian_complex(spec.grid, u)
    du = gr.holo_gradient(spec.grid, u)
    z, h_tr = e_term_from_parts(spec.omega, du, spec.dbar_omega, spec.omega_inv)
    sigma = hess + h_tr[..., None, None] * spec.omega - (spec.n - 1) * z
    return geo.ddbar_scalar(spec.grid, spec.omega, ha.hermitize(sigma))
