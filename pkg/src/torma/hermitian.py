"""Pointwise Hermitian multilinear algebra for (1,1)- and (n-1,n-1)-forms.

All functions act on stacked arrays: a Hermitian field is an ndarray of shape
(..., n, n) whose leading axes range over grid nodes. A real (1,1)-form
i a_{i jbar} dz^i dzbar^j is represented by its Hermitian coefficient matrix a;
an (n-1,n-1)-form is represented exclusively by its Hodge dual (1,1)-form with
respect to a reference metric g (full exterior coefficients exist only in the
test oracle).

Index conventions: tr_g(a) = tr(g^{-1} a) realizes g^{i jbar} a_{i jbar};
raising with g^{-1} realizes the metric contractions throughout.

Key closed forms (dual pairing tr(g^{-1} s g^{-1} c) against test (1,1)-forms):

    star(a ^ omega^{n-2} / (n-2)!)        = tr_g(a) g - a                    (B1)
    star(a ^ b ^ omega^{n-3} / (n-3)!)    = B2(a, b)
    star(a ^ b ^ c ^ omega^{n-4}/(n-4)!)  = B3(a, b, c)
    [a1 ^ .. ^ ak ^ omega^{n-k} / ((n-k)! dV)] = Sk(a1, .., ak)

where Sk is the full polarization of k! e_k(g^{-1}a) (elementary symmetric
functions of the relative eigenvalues) and B_k pairs to S_{k+1}. These give
the Hodge star of every wedge combination the equations require, without
storing exterior coefficients.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


# ---------------------------------------------------------------------------
# basic checks


def hermitian_error(a):
    """Sup-norm deviation from Hermitian symmetry."""
    return float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))))


def hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def min_eigenvalue(a):
    """Smallest eigenvalue over all nodes of a Hermitian field."""
    return float(np.min(np.linalg.eigvalsh(a)))


def is_positive(a, tol=0.0):
    return min_eigenvalue(a) > tol


def require_positive(a, what="metric"):
    lam = min_eigenvalue(a)
    if not lam > 0.0:
        raise ValidationError(f"{what} is not positive definite (min eigenvalue {lam:.3e})")


def require_same_dim(*fields):
    dims = {f.shape[-1] for f in fields}
    if len(dims) != 1:
        raise ValidationError(f"dimension mismatch between matrix fields: {sorted(dims)}")


# ---------------------------------------------------------------------------
# trace contractions


def _trace(x):
    return np.einsum("...ii->...", x)


def _raise_all(gi, mats):
    """g^{-1} m for each argument; all chain traces reduce to matmul chains."""
    return [gi @ np.asarray(m, dtype=np.complex128) for m in mats]


def s1(g, a, gi=None):
    gi = np.linalg.inv(g) if gi is None else gi
    return _trace(gi @ a)


def s2(g, a, b, gi=None):
    """Polarized 2 e_2: S2(a,a) = (tr_g a)^2 - tr((g^{-1}a)^2)."""
    gi = np.linalg.inv(g) if gi is None else gi
    ra, rb = _raise_all(gi, (a, b))
    return _trace(ra) * _trace(rb) - _trace(ra @ rb)


def s3(g, a, b, c, gi=None):
    """Polarized 6 e_3 of the relative eigenvalues."""
    gi = np.linalg.inv(g) if gi is None else gi
    ra, rb, rc = _raise_all(gi, (a, b, c))
    ta, tb, tc = _trace(ra), _trace(rb), _trace(rc)
    rab, rac, rbc = ra @ rb, ra @ rc, rb @ rc
    return (
        ta * tb * tc
        - ta * _trace(rbc)
        - tb * _trace(rac)
        - tc * _trace(rab)
        + _trace(rab @ rc)
        + _trace(rac @ rb)
    )


def s4(g, a, b, c, d, gi=None):
    """Polarized 24 e_4 (cycle-partition expansion)."""
    gi = np.linalg.inv(g) if gi is None else gi
    ra, rb, rc, rd = _raise_all(gi, (a, b, c, d))
    ta, tb, tc, td = _trace(ra), _trace(rb), _trace(rc), _trace(rd)
    rab, rac, rad = ra @ rb, ra @ rc, ra @ rd
    rbc, rbd, rcd = rb @ rc, rb @ rd, rc @ rd
    tab, tac, tad = _trace(rab), _trace(rac), _trace(rad)
    tbc, tbd, tcd = _trace(rbc), _trace(rbd), _trace(rcd)
    return (
        ta * tb * tc * td
        - (tab * tc * td + tac * tb * td + tad * tb * tc
           + tbc * ta * td + tbd * ta * tc + tcd * ta * tb)
        + (tab * tcd + tac * tbd + tad * tbc)
        + ta * (_trace(rbc @ rd) + _trace(rbd @ rc))
        + tb * (_trace(rac @ rd) + _trace(rad @ rc))
        + tc * (_trace(rab @ rd) + _trace(rad @ rb))
        + td * (_trace(rab @ rc) + _trace(rac @ rb))
        - (_trace(rab @ rcd) + _trace(rab @ rd @ rc) + _trace(rac @ rbd)
           + _trace(rac @ rd @ rb) + _trace(rad @ rbc) + _trace(rad @ rc @ rb))
    )


# ---------------------------------------------------------------------------
# Hodge duals of wedge products


def b1(g, a, gi=None):
    """star(a ^ omega^{n-2}/(n-2)!) = (tr_g a) g - a."""
    gi = np.linalg.inv(g) if gi is None else gi
    return _trace(gi @ a)[..., None, None] * g - a


def b2(g, a, b, gi=None):
    """star(a ^ b ^ omega^{n-3}/(n-3)!), n >= 3."""
    gi = np.linalg.inv(g) if gi is None else gi
    ra, rb = _raise_all(gi, (a, b))
    ta, tb = _trace(ra), _trace(rb)
    s2ab = ta * tb - _trace(ra @ rb)
    return (
        s2ab[..., None, None] * g
        - ta[..., None, None] * b
        - tb[..., None, None] * a
        + g @ (ra @ rb + rb @ ra)
    )


def b3(g, a, b, c, gi=None):
    """star(a ^ b ^ c ^ omega^{n-4}/(n-4)!), n >= 4."""
    gi = np.linalg.inv(g) if gi is None else gi
    ra, rb, rc = _raise_all(gi, (a, b, c))
    ta, tb, tc = _trace(ra), _trace(rb), _trace(rc)
    rab, rac, rbc = ra @ rb, ra @ rc, rb @ rc
    s2ab = ta * tb - _trace(rab)
    s2ac = ta * tc - _trace(rac)
    s2bc = tb * tc - _trace(rbc)
    s3abc = (
        ta * tb * tc - ta * _trace(rbc) - tb * _trace(rac) - tc * _trace(rab)
        + _trace(rab @ rc) + _trace(rac @ rb)
    )
    chains = rab @ rc + rac @ rb + rb @ rac + rbc @ ra + rc @ rab + rc @ rb @ ra
    return (
        s3abc[..., None, None] * g
        - s2ab[..., None, None] * c
        - s2bc[..., None, None] * a
        - s2ac[..., None, None] * b
        + ta[..., None, None] * (g @ (rbc + rc @ rb))
        + tb[..., None, None] * (g @ (rac + rc @ ra))
        + tc[..., None, None] * (g @ (rab + rb @ ra))
        - g @ chains
    )


def inverse_star_sigma(g, s, gi=None):
    """sigma with star(s) = sigma ^ omega^{n-2}/(n-2)!: sigma = tr_g(s)/(n-1) g - s.

    Lets any (n-1,n-1)-form given by its dual s be rewritten in the
    sigma-wedge-omega^{n-2} shape used by the ddbar scalar machinery.
    """
    n = g.shape[-1]
    gi = np.linalg.inv(g) if gi is None else gi
    return (_trace(gi @ s) / (n - 1))[..., None, None] * g - s


# ---------------------------------------------------------------------------
# the metric-level bijection omega <-> omega^{n-1}


def star_power(omega_ref, omega):
    """(1/(n-1)!) star(omega^{n-1}) as a Hermitian field; the adjugate relative
    to omega_ref: det(a)/det(g) * g a^{-1} g.

    With omega_ref = I and omega = diag(lambda), the result is
    diag(prod_{j != i} lambda_j).
    """
    require_same_dim(omega_ref, omega)
    require_positive(omega_ref, "reference metric")
    require_positive(omega, "metric")
    ratio = (np.linalg.det(omega) / np.linalg.det(omega_ref)).real
    return ratio[..., None, None] * (omega_ref @ np.linalg.solve(omega, omega_ref))


def nm1_root(omega_ref, s):
    """Unique positive omega_u with (1/(n-1)!) star(omega_u^{n-1}) = s.

    Via the relative eigendecomposition: with s = U diag(s_i) U* in an
    omega_ref-orthonormal frame, det(lambda) = (prod s_i)^{1/(n-1)} and
    lambda_i = det(lambda)/s_i.
    """
    require_same_dim(omega_ref, s)
    require_positive(omega_ref, "reference metric")
    require_positive(s, "(n-1,n-1) form dual")
    n = s.shape[-1]
    chol = np.linalg.cholesky(omega_ref)
    chol_inv = np.linalg.inv(chol)
    s_flat = chol_inv @ s @ np.conj(np.swapaxes(chol_inv, -1, -2))
    vals, vecs = np.linalg.eigh(s_flat)
    det_lam = np.prod(vals, axis=-1) ** (1.0 / (n - 1))
    lam = det_lam[..., None] / vals
    k = (vecs * lam[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))
    return hermitize(chol @ k @ np.conj(np.swapaxes(chol, -1, -2)))


def star_wedge(omega, alpha):
    """(1/(n-2)!) star(alpha ^ omega^{n-2}) = (tr_omega alpha) omega - alpha.

    alpha is any real (1,1)-form (not necessarily positive); needs n >= 3
    for the wedge to be literal, although the right-hand side is the n = 2
    Hodge star as well.
    """
    require_same_dim(omega, alpha)
    if omega.shape[-1] < 3:
        raise ValidationError("star_wedge needs n >= 3 (omega^{n-2} with n-2 >= 1)")
    require_positive(omega, "metric")
    return b1(omega, alpha)


def relative_eigenvalues(g, a):
    """Eigenvalues of a relative to g (ascending), shape (..., n)."""
    chol_inv = np.linalg.inv(np.linalg.cholesky(g))
    return np.linalg.eigvalsh(chol_inv @ a @ np.conj(np.swapaxes(chol_inv, -1, -2)))
