"""Cauchy principal-value quadrature by pole subtraction.

All singular momentum integrals in the engine reduce to resolvent-type
integrals

    A(p) = int_{-K}^{K} f(q) / (q - p - i0) dq

and their first two derivatives in ``p``.  For a real interior pole this is
the principal value plus ``i*pi*f(p)``; for a complex pole the integral is
regular and the same subtracted scheme is used purely as a variance reducer.

The workhorse representation is a *row vector* ``r`` with
``A(p) ~= r @ f_nodes``: the value of ``f`` at the pole is folded into the
row through a local cubic interpolation stencil, so the whole discretized
integral operator becomes an ordinary dense matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import PoleOutOfRangeError
from ._kernels import lattice_rows
from .grids import MomentumGrid

# Nodes closer to the pole than this fraction of the spacing are evaluated
# through a local series for the subtracted quotient.
NEAR_NODE_FRACTION = 0.25

# Edge guard: logarithmic endpoint factors are clamped at this fraction of a
# grid spacing.  Only rows whose pole (an artifact of domain truncation)
# falls essentially on the window edge are affected.
EDGE_CLAMP_FRACTION = 0.5


@dataclass(frozen=True)
class PVKernelSample:
    """A principal-value kernel sample split into pole data and regular part.

    ``value(k)`` for ``k`` away from the pole is
    ``cauchy_weight / (k - pole_location) + regular_part`` -- the raw
    ``1/(k - pole)`` factor is never materialized as an infinity.
    """

    pole_location: complex
    cauchy_weight: complex
    regular_part: complex = 0.0

    def value(self, k: complex) -> complex:
        return self.cauchy_weight / (k - self.pole_location) + self.regular_part


def _clamped_log_factor(pole: complex, k_max: float, floor: float) -> complex:
    """``int_{-K}^{K} dq/(q - pole)`` with edge-distance clamping.

    Real interior poles get the principal value; complex poles the principal
    branch, which limits continuously to PV + i*pi from above.
    """
    d1 = k_max - pole          # K - p
    d2 = -k_max - pole         # -K - p
    if pole.imag == 0.0:
        a1 = max(abs(d1.real), floor)
        a2 = max(abs(d2.real), floor)
        return math.log(a1) - math.log(a2)
    if abs(d1) < floor:
        d1 *= floor / abs(d1)
    if abs(d2) < floor:
        d2 *= floor / abs(d2)
    return np.log(d1) - np.log(d2)


STENCIL_NPTS = 6


def _lagrange_stencil(nodes: np.ndarray, j0: int, x: complex, deriv: int = 0):
    """Weights of the local Lagrange interpolant (or derivative) at ``x``.

    Uses a :data:`STENCIL_NPTS`-point window starting at ``j0``.  Weights are
    formed from the monic node polynomials in a shifted/scaled variable for
    conditioning.
    """
    xs = nodes[j0:j0 + STENCIL_NPTS]
    h = xs[1] - xs[0]
    # Work in units of the spacing around the window centre.
    c = xs.mean()
    u = (np.asarray(xs) - c) / h
    ux = (x - c) / h
    w = np.zeros(STENCIL_NPTS, dtype=complex)
    for i in range(STENCIL_NPTS):
        others = np.delete(u, i)
        coeffs = np.poly(others)
        denom = np.prod(u[i] - others)
        for _ in range(deriv):
            coeffs = np.polyder(coeffs)
        w[i] = np.polyval(coeffs, ux) / denom
    return w / h ** deriv


def _stencil_window(grid: MomentumGrid, x: float) -> int:
    """Leftmost index of the stencil window bracketing ``x``."""
    j = int(math.floor((x + grid.k_max) / grid.spacing))
    half = STENCIL_NPTS // 2 - 1
    return min(max(j - half, 0), grid.n_points - STENCIL_NPTS)


def cauchy_row(grid: MomentumGrid, pole: complex, resolvent: bool = True,
               fold_pole: bool = True):
    """Quadrature row for ``int f(q)/(q - pole - i0) dq`` on ``grid``.

    Parameters
    ----------
    pole : complex
        Pole position.  Real poles may lie inside or outside the window;
        complex poles are handled with the analytic (non-PV) endpoint factor.
    resolvent : bool
        If True (default), real interior poles include the ``+i*pi*f(pole)``
        residue term, i.e. the row represents the upper boundary value.  If
        False the row is the bare principal value.
    fold_pole : bool
        If True the pole value ``f(pole)`` is expressed through a cubic
        interpolation stencil and folded into the returned row.  If False the
        pole coefficient is returned separately.

    Returns
    -------
    row : ndarray (n,)
    pole_coeff : complex
        Zero when ``fold_pole`` is True.
    """
    nodes, weights = grid.nodes, grid.weights
    k_max, h = grid.k_max, grid.spacing
    pole = complex(pole)
    floor = EDGE_CLAMP_FRACTION * h

    real_inside = (pole.imag == 0.0) and (abs(pole.real) < k_max)
    anchor = min(max(pole.real, -k_max), k_max)
    j0 = _stencil_window(grid, anchor)
    # Local polynomial evaluation point: the pole itself while it stays
    # within one spacing of the sampled line (local analytic continuation),
    # the clipped real anchor otherwise.
    x_eval = pole if (abs(pole.imag) < h and abs(pole.real) <= k_max) \
        else anchor
    sten = _lagrange_stencil(nodes, j0, x_eval)

    log_fac = _clamped_log_factor(pole, k_max, floor)
    if resolvent and real_inside:
        log_fac = log_fac + 1j * math.pi

    row = np.zeros(grid.n_points, dtype=complex)
    diffs = nodes - pole
    jstar = int(round((pole.real + k_max) / h))
    jstar = min(max(jstar, 0), grid.n_points - 1)
    near = abs(diffs[jstar]) < NEAR_NODE_FRACTION * h \
        and abs(pole.real) <= k_max

    mask = np.ones(grid.n_points, dtype=bool)
    if near:
        mask[jstar] = False
    base = np.zeros(grid.n_points, dtype=complex)
    base[mask] = weights[mask] / diffs[mask]
    row += base
    pole_coeff = log_fac - base.sum()

    if near:
        # (f(q*) - f(p))/(q* - p) ~ f'(p) + (q*-p) f''(p)/2 via local stencils.
        d = diffs[jstar]
        d1 = _lagrange_stencil(nodes, j0, x_eval, deriv=1)
        d2 = _lagrange_stencil(nodes, j0, x_eval, deriv=2)
        row[j0:j0 + STENCIL_NPTS] += weights[jstar] * (d1 + 0.5 * d * d2)

    if fold_pole:
        row[j0:j0 + STENCIL_NPTS] += pole_coeff * sten
        return row, 0.0 + 0.0j
    return row, pole_coeff


def _lattice_row_matrix(grid: MomentumGrid, idx: np.ndarray) -> np.ndarray:
    """Row matrix for resolvent poles sitting exactly on grid nodes."""
    nodes = grid.nodes
    floor = EDGE_CLAMP_FRACTION * grid.spacing
    m = idx.size
    j0 = np.empty(m, dtype=np.int64)
    d1 = np.empty((m, STENCIL_NPTS), dtype=float)
    log_plus = np.empty(m, dtype=complex)
    for i, js in enumerate(idx):
        j0[i] = _stencil_window(grid, nodes[js])
        d1[i] = _lagrange_stencil(nodes, j0[i], nodes[js], deriv=1).real
        log_plus[i] = _clamped_log_factor(nodes[js], grid.k_max, floor) \
            + 1j * math.pi
    return lattice_rows(nodes, grid.weights, idx, j0, d1, log_plus)


def cauchy_row_matrix(grid: MomentumGrid, poles, resolvent: bool = True):
    """Stack of :func:`cauchy_row` rows for many poles (all folded).

    When every pole is real, strictly interior, and coincides with a grid
    node, the assembly is delegated to a batched kernel.
    """
    poles = np.asarray(poles, dtype=complex).ravel()
    if resolvent and poles.size:
        idx = np.rint((poles.real + grid.k_max) / grid.spacing).astype(int)
        inside = (idx > 0) & (idx < grid.n_points - 1)
        on_node = np.zeros(poles.size, dtype=bool)
        ok = inside & (poles.imag == 0.0)
        on_node[ok] = np.abs(poles.real[ok] - grid.nodes[idx[ok]]) \
            < 1e-12 * max(grid.spacing, 1.0)
        if on_node.all():
            return _lattice_row_matrix(grid, idx.astype(np.int64))
        if on_node.any():
            out = np.empty((poles.size, grid.n_points), dtype=complex)
            out[on_node] = _lattice_row_matrix(
                grid, idx[on_node].astype(np.int64))
            for i in np.flatnonzero(~on_node):
                out[i], _ = cauchy_row(grid, poles[i], resolvent=True)
            return out
    out = np.empty((poles.size, grid.n_points), dtype=complex)
    for i, p in enumerate(poles):
        out[i], _ = cauchy_row(grid, p, resolvent=resolvent)
    return out


def pv_integrate(f_vals, pole: float, grid: MomentumGrid, f_pole=None):
    """Principal value of ``int f(q)/(q - pole) dq`` over the grid window.

    ``pole`` must be real and strictly interior; poles within two spacings of
    the window edge raise :class:`PoleOutOfRangeError`.  ``f_pole`` optionally
    supplies the analytic pole value; otherwise a local cubic interpolation
    of the sampled values is used.
    """
    pole = float(pole)
    if abs(pole) >= grid.k_max - 2.0 * grid.spacing:
        raise PoleOutOfRangeError(
            f"pole {pole} within two spacings of the window edge")
    f_vals = np.asarray(f_vals, dtype=complex)
    if f_vals.shape != (grid.n_points,):
        raise ValueError("f_vals must be sampled on the grid nodes")
    row, coeff = cauchy_row(grid, pole, resolvent=False,
                            fold_pole=f_pole is None)
    val = row @ f_vals
    if f_pole is not None:
        val += coeff * complex(f_pole)
    return val


def cauchy_value(f_vals, grid: MomentumGrid, pole: complex) -> complex:
    """Upper boundary value ``int f/(q - pole - i0) dq`` from node samples."""
    row, _ = cauchy_row(grid, pole, resolvent=True)
    return row @ np.asarray(f_vals, dtype=complex)


def _pole_derivatives(f_vals, grid: MomentumGrid, pole: complex, up_to: int):
    """Local-cubic estimates of f(p), f'(p), f''(p), f'''(p) at the pole."""
    anchor = min(max(pole.real, -grid.k_max), grid.k_max)
    j0 = _stencil_window(grid, anchor)
    seg = np.asarray(f_vals[j0:j0 + STENCIL_NPTS], dtype=complex)
    out = []
    for d in range(up_to + 1):
        out.append(_lagrange_stencil(grid.nodes, j0, pole, deriv=d) @ seg)
    return out


def cauchy_deriv(f_vals, grid: MomentumGrid, pole: complex) -> complex:
    """d/dp of :func:`cauchy_value`: finite part of ``int f/(q-p-i0)^2``."""
    nodes, weights = grid.nodes, grid.weights
    k_max, h = grid.k_max, grid.spacing
    pole = complex(pole)
    f_vals = np.asarray(f_vals, dtype=complex)
    floor = EDGE_CLAMP_FRACTION * h
    fp, fp1, fp2, fp3 = _pole_derivatives(f_vals, grid, pole, 3)

    real_inside = (pole.imag == 0.0) and (abs(pole.real) < k_max)
    log_fac = _clamped_log_factor(pole, k_max, floor)
    if real_inside:
        log_fac = log_fac + 1j * math.pi
    d1 = k_max - pole
    d2 = k_max + pole
    if abs(d1) < floor:
        d1 = floor
    if abs(d2) < floor:
        d2 = floor
    j2 = -1.0 / d1 - 1.0 / d2

    diffs = nodes - pole
    small = np.abs(diffs) < NEAR_NODE_FRACTION * h
    quot = np.zeros_like(diffs, dtype=complex)
    dd = diffs[~small]
    fv = f_vals[~small]
    quot[~small] = (fv - fp - fp1 * dd) / dd ** 2
    if small.any():
        ds = diffs[small]
        quot[small] = 0.5 * fp2 + ds * fp3 / 6.0
    return weights @ quot + fp * j2 + fp1 * log_fac


def cauchy_second(f_vals, grid: MomentumGrid, pole: complex) -> complex:
    """Second ``p`` derivative of :func:`cauchy_value`."""
    nodes, weights = grid.nodes, grid.weights
    k_max, h = grid.k_max, grid.spacing
    pole = complex(pole)
    f_vals = np.asarray(f_vals, dtype=complex)
    floor = EDGE_CLAMP_FRACTION * h
    fp, fp1, fp2, fp3 = _pole_derivatives(f_vals, grid, pole, 3)

    real_inside = (pole.imag == 0.0) and (abs(pole.real) < k_max)
    log_fac = _clamped_log_factor(pole, k_max, floor)
    if real_inside:
        log_fac = log_fac + 1j * math.pi
    d1 = k_max - pole
    d2 = k_max + pole
    if abs(d1) < floor:
        d1 = floor
    if abs(d2) < floor:
        d2 = floor
    j2 = -1.0 / d1 - 1.0 / d2
    j3 = -1.0 / d1 ** 2 + 1.0 / d2 ** 2  # d/dp of j2

    diffs = nodes - pole
    small = np.abs(diffs) < NEAR_NODE_FRACTION * h
    quot = np.zeros_like(diffs, dtype=complex)
    dd = diffs[~small]
    fv = f_vals[~small]
    quot[~small] = 2.0 * (fv - fp - fp1 * dd - 0.5 * fp2 * dd ** 2) / dd ** 3
    if small.any():
        quot[small] = fp3 / 3.0
    return weights @ quot + fp * j3 + 2.0 * fp1 * j2 + fp2 * log_fac
