"""Periodic grids on the flat complex torus C^n / (Z^n + i Z^n) and spectral calculus.

Conventions
-----------
Complex coordinates z^j = x_j + i y_j with unit periods. Real coordinates are
stored interleaved: array axis 2j samples x_{j+1}, axis 2j+1 samples y_{j+1},
so a field is an ndarray of shape ``grid.shape`` with len == 2n.

Wirtinger derivatives:

    d_holo     = (d/dx_j - i d/dy_j) / 2
    d_antiholo = (d/dx_j + i d/dy_j) / 2

Derivatives are Fourier multipliers (exact for band-limited fields). A field
constant along a coordinate may be stored with size 1 on that axis (reduced
ansatz); derivatives along such axes are exactly zero. Fourth-order central
finite differences are available as a cross-check mode
(``set_derivative_method("fd4")``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as _iterproduct

import numpy as np
import scipy.fft

from .errors import ValidationError

_DERIVATIVE_METHOD = "spectral"
_FFT_WORKERS = -1  # scipy.fft convention: -1 means all available cores
_MAX_NODES = 2 ** 24  # memory guard: ~2.4 GiB for one complex 3x3 matrix field


def set_node_budget(max_nodes):
    """Cap on the total node count accepted by TorusGrid."""
    global _MAX_NODES
    _MAX_NODES = int(max_nodes)


def set_derivative_method(method):
    """Select 'spectral' (default) or 'fd4' for all derivative operators."""
    global _DERIVATIVE_METHOD
    if method not in ("spectral", "fd4"):
        raise ValidationError(f"unknown derivative method {method!r}")
    _DERIVATIVE_METHOD = method


def get_derivative_method():
    return _DERIVATIVE_METHOD


def set_fft_workers(workers):
    """Thread count for FFTs (scipy.fft workers); -1 uses all cores."""
    global _FFT_WORKERS
    _FFT_WORKERS = int(workers)


@dataclass(frozen=True)
class TorusGrid:
    """Discretization of the torus: complex dimension n and 2n axis sizes.

    sizes[2j], sizes[2j+1] are the node counts along x_{j+1}, y_{j+1}.
    Active axes (size > 1) must be powers of two >= 4.
    """

    n: int
    sizes: tuple = field(default=())

    def __post_init__(self):
        if not 2 <= self.n <= 4:
            raise ValidationError(f"complex dimension must be in [2, 4], got {self.n}")
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) != 2 * self.n:
            raise ValidationError(
                f"need {2 * self.n} axis sizes for n={self.n}, got {len(sizes)}"
            )
        for s in sizes:
            if s != 1 and (s < 4 or s & (s - 1)):
                raise ValidationError(f"active axis sizes must be powers of two >= 4, got {s}")
        total = math.prod(sizes)
        if total > _MAX_NODES:
            raise ValidationError(
                f"grid holds {total} nodes, above the budget {_MAX_NODES} "
                "(raise it with set_node_budget)"
            )
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def reduced(cls, n, size, active_coords=None):
        """Grid resolving only the listed real coordinates (default: x_1..x_n)."""
        if active_coords is None:
            active_coords = tuple(2 * j for j in range(n))
        sizes = [1] * (2 * n)
        for a in active_coords:
            sizes[a] = size
        return cls(n, tuple(sizes))

    @classmethod
    def default(cls, n):
        """Desk-scale default: 32 per active coordinate for n = 2 (two active),
        16 with three active coordinates for n = 3, 8 with two for n = 4."""
        size, count = {2: (32, 2), 3: (16, 3), 4: (8, 2)}[n]
        return cls.reduced(n, size, active_coords=tuple(2 * j for j in range(count)))

    @property
    def shape(self):
        return self.sizes

    @property
    def num_nodes(self):
        return math.prod(self.sizes)

    @property
    def active_axes(self):
        return tuple(a for a, s in enumerate(self.sizes) if s > 1)

    @property
    def active_mask(self):
        return tuple(1 if s > 1 else 0 for s in self.sizes)

    @property
    def cell_volume(self):
        return 1.0 / self.num_nodes

    def axis_coordinates(self, axis):
        pts = np.arange(self.sizes[axis]) / self.sizes[axis]
        shape = [1] * (2 * self.n)
        shape[axis] = self.sizes[axis]
        return pts.reshape(shape)

    def coordinate(self, axis):
        """Coordinate values broadcast over the full grid shape."""
        return np.broadcast_to(self.axis_coordinates(axis), self.sizes)

    def refined(self, factor=2):
        """Same grid with every active axis refined by an integer factor."""
        return TorusGrid(self.n, tuple(s if s == 1 else s * factor for s in self.sizes))

    def zeros(self, *extra):
        return np.zeros(self.sizes + tuple(extra), dtype=np.complex128)

    def check_field(self, f, extra_shape=()):
        want = self.sizes + tuple(extra_shape)
        if f.shape != want:
            raise ValidationError(f"field shape {f.shape} does not match grid shape {want}")


def _fft(a, axis):
    return scipy.fft.fft(a, axis=axis, workers=_FFT_WORKERS)


def _ifft(a, axis):
    return scipy.fft.ifft(a, axis=axis, workers=_FFT_WORKERS)


def deriv_real(grid, f, axis):
    """d/dx along one real axis (periodic, unit period)."""
    size = grid.sizes[axis]
    if size == 1:
        return np.zeros_like(np.asarray(f, dtype=np.complex128))
    f = np.asarray(f, dtype=np.complex128)
    if _DERIVATIVE_METHOD == "fd4":
        h = 1.0 / size
        return (
            8.0 * (np.roll(f, -1, axis) - np.roll(f, 1, axis))
            - (np.roll(f, -2, axis) - np.roll(f, 2, axis))
        ) / (12.0 * h)
    k = np.fft.fftfreq(size, d=1.0 / size)
    if size % 2 == 0:
        k[size // 2] = 0.0  # Nyquist mode has no well-defined odd derivative
    shape = [1] * f.ndim
    shape[axis] = size
    mult = (2j * np.pi * k).reshape(shape)
    return _ifft(_fft(f, axis) * mult, axis)


def d_holo(grid, f, i):
    """Holomorphic derivative d/dz^i (0-based i)."""
    if not 0 <= i < grid.n:
        raise ValidationError(f"coordinate index {i} out of range for n={grid.n}")
    return 0.5 * (deriv_real(grid, f, 2 * i) - 1j * deriv_real(grid, f, 2 * i + 1))


def d_antiholo(grid, f, i):
    """Antiholomorphic derivative d/dzbar^i (0-based i)."""
    if not 0 <= i < grid.n:
        raise ValidationError(f"coordinate index {i} out of range for n={grid.n}")
    return 0.5 * (deriv_real(grid, f, 2 * i) + 1j * deriv_real(grid, f, 2 * i + 1))


def holo_gradient(grid, f):
    """All d/dz^i stacked on a trailing axis: shape grid.shape + (n,)."""
    return np.stack([d_holo(grid, f, i) for i in range(grid.n)], axis=-1)


def hessian_complex(grid, u):
    """Mixed complex Hessian u_{i jbar} = d_i d_jbar u, shape grid.shape + (n, n)."""
    n = grid.n
    du = [d_holo(grid, u, i) for i in range(n)]
    hess = grid.zeros(n, n)
    for i in range(n):
        for j in range(n):
            hess[..., i, j] = d_antiholo(grid, du[i], j)
    return hess


def trace_with_inverse(g, a):
    """Pointwise tr(g^{-1} a); equals the contraction g^{i jbar} a_{i jbar}."""
    return np.einsum("...ij,...ji->...", np.linalg.inv(g), a)


def laplacian(grid, omega, u):
    """Metric Laplacian g^{i jbar} u_{i jbar} for the Hermitian field omega."""
    return trace_with_inverse(omega, hessian_complex(grid, u))


def mean(grid, f):
    """Grid average (uniform measure; the flat torus has unit volume)."""
    return complex(np.mean(f)) if np.iscomplexobj(f) else float(np.mean(f))


def sup_norm(f):
    return float(np.max(np.abs(f)))


def grad_norm_sq(grid, omega, f):
    """|grad f|^2_g = g^{i jbar} f_i conj(f_j), pointwise real field."""
    df = holo_gradient(grid, f)
    ginv = np.linalg.inv(omega)
    return np.einsum("...j,...ji,...i->...", np.conj(df), ginv, df).real


def volume_weights(grid, g):
    """Discrete weights so that sum(f * weights) approximates int f omega^n.

    omega^n = n! det(g) (2 dx dy)^n on the unit torus, hence the 2^n n! factor.
    """
    det = np.linalg.det(g).real
    return det * (2.0 ** grid.n) * float(math.factorial(grid.n)) * grid.cell_volume


def integral(grid, g, f):
    """int_M f omega^n via the discrete weights."""
    return complex(np.sum(f * volume_weights(grid, g)))


def drop_nyquist(grid, f):
    """Project out all modes carrying a Nyquist index on any active axis.

    The spectral first derivative annihilates those modes (odd multiplier), so
    they are invisible to the solver's Jacobian; iterative solves work in this
    resolved subspace.
    """
    fh = np.asarray(f, dtype=np.complex128)
    for axis in grid.active_axes:
        fh = _fft(fh, axis)
    for axis in grid.active_axes:
        size = grid.sizes[axis]
        if size % 2 == 0:
            sl = [slice(None)] * fh.ndim
            sl[axis] = size // 2
            fh[tuple(sl)] = 0.0
    for axis in grid.active_axes:
        fh = _ifft(fh, axis)
    return fh


def resample(grid, f, out_grid):
    """Spectral resample between grids (zero-pad to refine, truncate to coarsen).

    Supports the 3/2-rule dealiasing workflow: evaluate products on a finer
    grid, truncate back. Inactive axes must match; active axes may differ.
    """
    if out_grid.n != grid.n:
        raise ValidationError("resample requires equal complex dimension")
    fh = np.asarray(f, dtype=np.complex128)
    for axis in grid.active_axes:
        fh = _fft(fh, axis)
    out = np.zeros(out_grid.sizes + f.shape[len(grid.sizes):], dtype=np.complex128)
    blocks_src, blocks_dst = [], []
    for axis in range(2 * grid.n):
        s_in, s_out = grid.sizes[axis], out_grid.sizes[axis]
        if (s_in == 1) != (s_out == 1):
            raise ValidationError("resample cannot activate or deactivate axes")
        if s_in == 1:
            blocks_src.append([slice(0, 1)])
            blocks_dst.append([slice(0, 1)])
        else:
            half = min(s_in, s_out) // 2
            blocks_src.append([slice(0, half), slice(s_in - half, s_in)])
            blocks_dst.append([slice(0, half), slice(s_out - half, s_out)])
    ndim = fh.ndim
    for combo in _iterproduct(*(range(len(b)) for b in blocks_src)):
        src = [slice(None)] * ndim
        dst = [slice(None)] * ndim
        for axis, c in enumerate(combo):
            src[axis] = blocks_src[axis][c]
            dst[axis] = blocks_dst[axis][c]
        out[tuple(dst)] = fh[tuple(src)]
    for axis in out_grid.active_axes:
        out = _ifft(out, axis)
    out *= out_grid.num_nodes / grid.num_nodes
    return out
