"""Connected photon-photon vertex functions on a momentum lattice.

The central object is the integral equation, at fixed two-photon energy
``eps``, for the full rescattering function ``F(x, k)``:

    F(x, k) = G0(eps - x - k) + int dq rho(q) G0(eps - x - q)
                                          Gd(eps - q) F(q, k),

with ``G0(y) = 1/(y + i0)`` the bare pair resolvent, ``rho`` the coupling
density and ``Gd`` the dressed emitter resolvent.  The bare pole is split
off once and for all, ``F = G0(eps - x - k) + S(x, k)``, leaving a *smooth*
remainder ``S`` that obeys a Fredholm equation of the second kind

    S = C + K S,

whose free term ``C`` is a difference quotient of the one-pole integral
``A(p) = int dq rho(q) Gd(eps - q) / (q - p - i0)`` and whose kernel ``K``
acts by Cauchy quadrature rows.  Everything is discretized on one uniform
momentum lattice so that all resolvent poles fall on (a shift of) the node
set and the discretized operators become ordinary dense matrices.

The same machinery supports the exchange remainder table (``solve_f12``):
the pair rescattering correction to three-photon processes at total energy
zero, driven by products of two single-pair vertices and solved iteratively
because its operator couples both momentum slots.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate as _interp
from scipy.linalg import lapack as _lapack
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, lgmres

from .errors import (GridTooCoarseError, MissingF12Error, NoConvergenceError,
                     SingularSystemError)
from .model import (ModelParams, coupling_density, dressed_green,
                    emitter_poles)
from .numerics.grids import MomentumGrid
from .numerics.pv import (cauchy_deriv, cauchy_row_matrix, cauchy_second,
                          cauchy_value)

MODES = ("exact", "weak_correlation", "quasi_markovian", "markovian")

# Modes in which the smooth rescattering part is dropped entirely.
_SMOOTHLESS_MODES = ("quasi_markovian", "markovian")

# Relative reciprocal-condition floor below which the discretized Fredholm
# matrix is reported as singular.
RCOND_FLOOR = 1e-12


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def pair_density(params: ModelParams, grid: MomentumGrid,
                 energy: float) -> np.ndarray:
    """``h(q) = rho(q) Gd(energy - q)`` sampled on the grid nodes."""
    return coupling_density(params, grid.nodes) \
        * dressed_green(params, energy - grid.nodes)


def kernel_matrix(params: ModelParams, grid: MomentumGrid,
                  energy: float) -> np.ndarray:
    """Discretized kernel ``K`` of the smooth-part equation ``S = C + K S``.

    ``(K f)(x_i) = -int dq h(q) f(q) / (q - (energy - x_i) - i0)`` with the
    boundary value taken from above; rows are Cauchy quadrature rows with
    the pole value folded in by local interpolation.
    """
    rows = cauchy_row_matrix(grid, energy - grid.nodes)
    return -rows * pair_density(params, grid, energy)[None, :]


def free_matrix(params: ModelParams, grid: MomentumGrid,
                energy: float) -> np.ndarray:
    """Free term ``C[i, j] = C(x_i, k_j)`` of the smooth-part equation.

    ``C(x, k) = (A(energy - x) - A(energy - k)) / (k - x)`` with the
    coincidence limit ``A'(energy - x)`` on the diagonal.
    """
    h_vals = pair_density(params, grid, energy)
    poles = energy - grid.nodes
    a_vals = cauchy_row_matrix(grid, poles) @ h_vals
    denom = grid.nodes[None, :] - grid.nodes[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (a_vals[:, None] - a_vals[None, :]) / denom
    di = np.arange(grid.n_points)
    c[di, di] = [cauchy_deriv(h_vals, grid, p) for p in poles]
    return c


def _factor_with_condition_check(mat: np.ndarray):
    """LU-factor ``mat``, raising if it is numerically singular."""
    anorm = np.linalg.norm(mat, 1)
    lu, piv = lu_factor(mat)
    rcond, info = _lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_FLOOR:
        raise SingularSystemError(
                "discretized vertex system is numerically singular",
                rcond=float(rcond))
    return lu, piv


@dataclass(frozen=True)
class VertexTable:
    """Smooth part ``S(x_i, k_j)`` of the pair vertex at one energy.

    ``connected(x, k) = PV 1/(energy - x - k) + S(x, k)`` is the connected
    vertex; the principal-value pole is kept symbolic by downstream
    consumers, which is why only the smooth part is tabulated.
    """

    params: ModelParams
    grid: MomentumGrid
    energy: float
    mode: str
    smooth: np.ndarray
    _spline_re: object = field(default=None, compare=False, repr=False)
    _spline_im: object = field(default=None, compare=False, repr=False)

    def column(self, k: float) -> np.ndarray:
        """Smooth part ``S(nodes, k)`` for an on-lattice second argument."""
        return self.smooth[:, self.grid.index_of(k)]

    def _splines(self):
        if self._spline_re is None:
            n = self.grid.nodes
            object.__setattr__(
                self, "_spline_re",
                _interp.RectBivariateSpline(n, n, self.smooth.real))
            object.__setattr__(
                self, "_spline_im",
                _interp.RectBivariateSpline(n, n, self.smooth.imag))
        return self._spline_re, self._spline_im

    def smooth_at(self, x, k):
        """Bicubic interpolation of the smooth part at off-lattice points."""
        if self.mode in _SMOOTHLESS_MODES:
            return np.zeros(np.broadcast(x, k).shape, dtype=complex) \
                if np.ndim(x) or np.ndim(k) else 0.0 + 0.0j
        sre, sim = self._splines()
        val = sre(x, k, grid=False) + 1j * sim(x, k, grid=False)
        return val if np.ndim(val) else complex(val)


def solve_f11(params: ModelParams, grid: MomentumGrid, energy: float,
              mode: str = "exact", check_refinement: bool = False,
              refine_tol: float = 5e-3) -> VertexTable:
    """Solve the smooth-part Fredholm equation at one pair energy.

    In the modes without rescattering corrections the smooth part vanishes
    identically and the table is all zeros.  ``check_refinement`` re-solves
    the ``k = 0`` column on a doubled lattice and raises
    :class:`GridTooCoarseError` if the two disagree beyond ``refine_tol``
    in the sup norm (relative to the column scale).
    """
    _check_mode(mode)
    n = grid.n_points
    if mode in _SMOOTHLESS_MODES:
        return VertexTable(params, grid, float(energy), mode,
                           np.zeros((n, n), dtype=complex))
    kmat = kernel_matrix(params, grid, energy)
    cmat = free_matrix(params, grid, energy)
    lu, piv = _factor_with_condition_check(np.eye(n) - kmat)
    smooth = lu_solve((lu, piv), cmat)
    table = VertexTable(params, grid, float(energy), mode, smooth)
    if check_refinement:
        fine = grid.refine()
        fine_col = solve_f11(params, fine, energy, mode).column(0.0)[::2]
        col = table.column(0.0)
        scale = max(np.abs(col).max(), 1e-30)
        if np.abs(fine_col - col).max() > refine_tol * scale:
            raise GridTooCoarseError(
                "doubled-lattice check failed for the pair vertex")
    return table


def born_f11_column(params: ModelParams, grid: MomentumGrid, energy: float,
                    k: float, n_terms: int = 8) -> np.ndarray:
    """Neumann-series iterate of the smooth-part column ``S(nodes, k)``.

    Independent of the direct solver's linear algebra; used as a
    cross-check at weak coupling where the series converges rapidly.
    """
    kmat = kernel_matrix(params, grid, energy)
    col = free_matrix(params, grid, energy)[:, grid.index_of(k)]
    acc = col.copy()
    term = col
    for _ in range(n_terms - 1):
        term = kmat @ term
        acc += term
    return acc


def _family_energy(args):
    params, grid, energy, mode = args
    return solve_f11(params, grid, energy, mode).column(0.0)


@dataclass(frozen=True)
class F11Family:
    """Smooth part ``S(x, 0; eps)`` tabulated over a pair-energy window."""

    params: ModelParams
    grid: MomentumGrid
    mode: str
    energies: np.ndarray
    columns: np.ndarray  # shape (n_energies, n_points)
    _spline_re: object = field(default=None, compare=False, repr=False)
    _spline_im: object = field(default=None, compare=False, repr=False)

    def _splines(self):
        if self._spline_re is None:
            object.__setattr__(
                self, "_spline_re",
                _interp.RectBivariateSpline(self.energies, self.grid.nodes,
                                            self.columns.real))
            object.__setattr__(
                self, "_spline_im",
                _interp.RectBivariateSpline(self.energies, self.grid.nodes,
                                            self.columns.imag))
        return self._spline_re, self._spline_im

    def smooth(self, x, energy):
        """Interpolated ``S(x, 0; energy)``."""
        if self.mode in _SMOOTHLESS_MODES:
            val = np.zeros(np.broadcast(x, energy).shape, dtype=complex)
            return val if val.ndim else 0.0 + 0.0j
        sre, sim = self._splines()
        val = sre(energy, x, grid=False) + 1j * sim(energy, x, grid=False)
        return val if np.ndim(val) else complex(val)

    def held_out_error(self) -> float:
        """Interpolation error at energies between the knots.

        The error is the sup norm over nodes, normalized by the global
        table scale.  Two exclusions apply, both tied to the finite
        momentum window rather than to the interpolation itself:

        * probes are taken from ``|eps| <= 0.75 * k_max``: whenever a
          quadrature pole of the solve crosses the window endpoint (every
          energy step), the truncated Cauchy integral jumps by the
          endpoint boundary value, and for ``|eps|`` near ``k_max`` that
          jump is resonance-enhanced to a level no energy interpolant can
          track (observables suppress that region by off-resonant
          propagator weight);
        * nodes within a few spacings of ``x = eps -+ k_max`` are skipped,
          where the endpoint artifact appears at fixed energy.
        """
        worst = 0.0
        scale = max(float(np.abs(self.columns).max()), 1e-30)
        mids = 0.5 * (self.energies[:-1] + self.energies[1:])
        mids = mids[np.abs(mids) <= 0.75 * self.grid.k_max]
        probe = mids[:: max(1, mids.size // 8)]
        nodes = self.grid.nodes
        pad = 4.0 * self.grid.spacing
        for eps in probe:
            exact = solve_f11(self.params, self.grid, eps,
                              self.mode).column(0.0)
            approx = self.smooth(nodes, eps)
            mask = (np.abs(nodes - (eps - self.grid.k_max)) > pad) \
                & (np.abs(nodes - (eps + self.grid.k_max)) > pad)
            if not np.any(mask):
                continue
            worst = max(worst,
                        float(np.abs((approx - exact)[mask]).max()) / scale)
        return worst


def solve_f11_family(params: ModelParams, grid: MomentumGrid,
                     mode: str = "exact", span_factor: float = 2.0,
                     max_step: float = None, workers: int = None
                     ) -> F11Family:
    """Tabulate ``S(x, 0; eps)`` on an energy lattice for interpolation.

    The window ``[-span_factor*k_max, span_factor*k_max]`` covers every
    pair energy reachable by two on-window photons; the energy step
    defaults to a quarter of the narrowest emitter linewidth (but never
    coarser than the momentum spacing) so that the resolvent structure is
    resolved even when delayed feedback produces long-lived modes.
    """
    _check_mode(mode)
    span = span_factor * grid.k_max
    if max_step is None:
        widths = [abs(z.imag) for z in emitter_poles(params)]
        narrow = min(widths) if widths else 2.0 * params.gamma
        max_step = min(0.5 * params.gamma, 0.25 * narrow)
    max_step = min(max_step, grid.spacing)
    n_eps = 2 * int(math.ceil(span / max_step)) + 1
    energies = np.linspace(-span, span, n_eps)
    if mode in _SMOOTHLESS_MODES:
        cols = np.zeros((n_eps, grid.n_points), dtype=complex)
        return F11Family(params, grid, mode, energies, cols)
    jobs = [(params, grid, float(e), mode) for e in energies]
    if workers is None:
        workers = min(int(os.environ.get("GIANTATOM_WORKERS", "4")),
                      os.cpu_count() or 1)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            cols = list(pool.map(_family_energy, jobs, chunksize=4))
    else:
        cols = [_family_energy(j) for j in jobs]
    return F11Family(params, grid, mode, energies, np.asarray(cols))


# ---------------------------------------------------------------------------
# Exchange remainder (pair rescattering inside three-photon processes)
# ---------------------------------------------------------------------------


def _divided_a(a1, a2, p1, p2, deriv, tiny):
    """First divided difference of ``A`` with Hermite coincidence limit."""
    d = p1 - p2
    return np.where(np.abs(d) > tiny, (a1 - a2) / np.where(d == 0, 1.0, d),
                    deriv)


@dataclass(frozen=True)
class F12Table:
    """Exchange remainder ``F12(a_i, b_j)`` at total pair energy zero."""

    params: ModelParams
    grid: MomentumGrid
    mode: str
    values: np.ndarray
    residual: float
    _spline_re: object = field(default=None, compare=False, repr=False)
    _spline_im: object = field(default=None, compare=False, repr=False)

    def at(self, a, b):
        if self.mode != "exact":
            val = np.zeros(np.broadcast(a, b).shape, dtype=complex)
            return val if val.ndim else 0.0 + 0.0j
        if self._spline_re is None:
            n = self.grid.nodes
            object.__setattr__(
                self, "_spline_re",
                _interp.RectBivariateSpline(n, n, self.values.real))
            object.__setattr__(
                self, "_spline_im",
                _interp.RectBivariateSpline(n, n, self.values.imag))
        val = self._spline_re(a, b, grid=False) \
            + 1j * self._spline_im(a, b, grid=False)
        return val if np.ndim(val) else complex(val)


def _extended_lattice(grid: MomentumGrid):
    """Lattice of all pairwise sums ``-(a_i + b_j)`` of grid nodes."""
    m = 2 * grid.n_points - 1
    return np.linspace(-2 * grid.k_max, 2 * grid.k_max, m)


def solve_f12(params: ModelParams, grid: MomentumGrid, family: F11Family,
              table0: VertexTable, mode: str = "exact", tol: float = 1e-6,
              max_iter: int = 500) -> F12Table:
    """Solve the exchange-remainder equation at total energy zero.

    The unknown ``F12(a, b)`` obeys

        F12(a, b) = int dq rho(q) G0(-a - b - q) Gd(-b - q)
                    [ F12(q, b) + F12(b, q) + P(b, q) ],

    with the pair-product source
    ``P(b, q) = F(b, 0; -q) Gd(-q) F(q, 0; 0)`` built from *full*
    single-pair vertices ``F = G0 + S``.  Expanding the bare resolvents
    produces poles at ``p1 = -a - b``, ``p2 = -b`` and ``p3 = 0``, all of
    which fall on a common extended lattice, so the inhomogeneity reduces
    to divided differences of one-pole integrals and the operator to
    precomputed quadrature rows applied per ``b`` column.

    In non-exact modes the remainder is dropped (all zeros); downstream
    consumers in ``weak_correlation`` mode must not request it at all.
    """
    _check_mode(mode)
    n = grid.n_points
    nodes = grid.nodes
    if mode in _SMOOTHLESS_MODES or mode == "weak_correlation":
        return F12Table(params, grid, mode,
                        np.zeros((n, n), dtype=complex), 0.0)

    ext = _extended_lattice(grid)
    rows_ext = cauchy_row_matrix(grid, ext)  # (2n-1, n)
    h = grid.spacing
    tiny = 0.25 * h

    rho = coupling_density(params, nodes)
    gd_mq = dressed_green(params, -nodes)            # Gd(-q)
    gd_bq = dressed_green(params, -(nodes[:, None] + nodes[None, :]))
    # gd_bq[j, l] = Gd(-b_j - q_l)

    s_q0 = table0.column(0.0)                        # S(q, 0; 0)
    s_bq = family.smooth(nodes[:, None],
                         -nodes[None, :])            # S(b_j, 0; -q_l)

    # Index of p1 = -(a_i + b_j) on the extended lattice.
    idx1 = (2 * (n - 1) - np.add.outer(np.arange(n), np.arange(n)))
    idx2 = 3 * (n - 1) // 2 - np.arange(n)           # p2 = -b_j
    idx3 = n - 1                                     # p3 = 0
    p1 = -(nodes[:, None] + nodes[None, :])
    p2 = -nodes

    # ---- inhomogeneity -----------------------------------------------
    # P(b, q) = [G0(-b - q) + S(b,0;-q)] Gd(-q) [G0(-q) + S(q,0;0)] and
    # G0(y - q) = -1/(q - y - i0); the four expansion pieces carry one,
    # two or three lattice poles handled by divided differences of
    # A_phi(p) = int phi(q)/(q - p - i0) dq.
    phi0 = rho * gd_mq                               # shared factor rho Gd(-q)
    # piece 4: smooth * smooth, pole p1 only.
    phi4 = phi0[None, :] * s_bq * s_q0[None, :] * gd_bq   # (n_b, n_q)
    a4 = rows_ext @ phi4.T                           # (2n-1, n_b)
    src = -a4[idx1, np.arange(n)[None, :]]

    # piece 3: S(b,0;-q) * G0(-q): poles p1, p3.
    phi3 = phi0[None, :] * s_bq * gd_bq
    a3 = rows_ext @ phi3.T
    a3_p3 = a3[idx3, :]
    d3 = np.array([cauchy_deriv(phi3[j], grid, 0.0) for j in range(n)])
    src += _divided_a(a3[idx1, np.arange(n)[None, :]], a3_p3[None, :],
                      p1, np.zeros_like(p1), d3[None, :], tiny)

    # piece 2: G0(-b - q) * S(q,0;0): poles p1, p2.
    phi2 = phi0[None, :] * s_q0[None, :] * gd_bq
    a2 = rows_ext @ phi2.T
    a2_p2 = a2[idx2, np.arange(n)]
    d2 = np.array([cauchy_deriv(phi2[j], grid, p2[j]) for j in range(n)])
    src += _divided_a(a2[idx1, np.arange(n)[None, :]], a2_p2[None, :],
                      p1, p2[None, :], d2[None, :], tiny)

    # piece 1: G0(-b - q) * G0(-q): poles p1, p2, p3 (second divided
    # difference; the overall sign from three resolvent expansions is -1).
    phi1 = phi0[None, :] * gd_bq
    a1 = rows_ext @ phi1.T
    a1_p1 = a1[idx1, np.arange(n)[None, :]]
    row_p2 = a1[idx2, np.arange(n)]                       # A_phi1(-b_j)
    row_p3 = a1[idx3, :]                                  # A_phi1(0)
    a1_p2 = np.broadcast_to(row_p2[None, :], (n, n))
    a1_p3 = np.broadcast_to(row_p3[None, :], (n, n))
    d1_p2 = np.array([cauchy_deriv(phi1[j], grid, p2[j]) for j in range(n)])
    d1_p3 = np.array([cauchy_deriv(phi1[j], grid, 0.0) for j in range(n)])
    p2_mat = np.broadcast_to(p2[None, :], (n, n))
    # [p1 p2] and [p2 p3] first divided differences, then [p1 p2 p3].
    dd12 = _divided_a(a1_p1, a1_p2, p1, p2_mat,
                      np.broadcast_to(d1_p2[None, :], (n, n)), tiny)
    dd23 = _divided_a(a1_p2, a1_p3, p2_mat, np.zeros((n, n)),
                      np.broadcast_to(d1_p3[None, :], (n, n)), tiny)
    d13 = p1 - 0.0
    coincid = np.abs(d13) <= tiny
    dd123 = np.empty((n, n), dtype=complex)
    ok = ~coincid
    dd123[ok] = (dd12[ok] - dd23[ok]) / d13[ok]
    if coincid.any():
        # p1 -> p3 with p2 fixed: derivative of the divided difference.
        s1 = np.array([cauchy_second(phi1[j], grid, 0.0) for j in range(n)])
        for i, j in zip(*np.nonzero(coincid)):
            if abs(p2[j]) > tiny:
                dd123[i, j] = (d1_p3[j] - dd23[i, j]) / (0.0 - p2[j])
            else:
                dd123[i, j] = 0.5 * s1[j]
    src += -dd123

    # ---- linear operator ----------------------------------------------
    # (T F)(a_i, b_j) = -A_psi(-a_i - b_j) with
    # psi_j(q) = rho(q) Gd(-b_j - q) [F(q, b_j) + F(b_j, q)].
    weight = rho[None, :] * gd_bq                    # (n_b, n_q)
    col_idx = np.arange(n)

    def apply_t(fmat: np.ndarray) -> np.ndarray:
        # psi[j, l] = rho Gd(-b_j - q_l) (F(q_l, b_j) + F(b_j, q_l))
        psi = weight * (fmat.T + fmat)
        vals = rows_ext @ psi.T                      # (2n-1, n_b)
        return -vals[idx1, col_idx[None, :]]

    def matvec(vec):
        fmat = vec.reshape(n, n)
        return (fmat - apply_t(fmat)).ravel()

    op = LinearOperator((n * n, n * n), matvec=matvec, dtype=complex)
    rhs = src.ravel()
    sol, info = lgmres(op, rhs, rtol=tol, atol=tol * np.abs(rhs).max(),
                       maxiter=max_iter)
    resid = np.linalg.norm(op @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if info != 0 or resid > 10 * tol:
        # Damped fixed-point fallback.
        fmat = src.copy()
        damping = 0.5
        resids = []
        for _ in range(max_iter):
            new = src + apply_t(fmat)
            resids.append(float(np.abs(new - fmat).max()
                                / max(np.abs(new).max(), 1e-300)))
            fmat = (1 - damping) * fmat + damping * new
            if resids[-1] < tol:
                break
        else:
            raise NoConvergenceError(
                "exchange-remainder iteration stalled",
                residuals=resids[-5:])
        values = fmat
        resid = resids[-1]
    else:
        values = sol.reshape(n, n)
    return F12Table(params, grid, mode, values, float(resid))


def require_f12(table: F12Table | None, mode: str) -> F12Table:
    """Guard for consumers that need the exchange remainder in exact mode."""
    if mode == "exact" and table is None:
        raise MissingF12Error(
            "exact-mode three-photon amplitudes need the exchange "
            "remainder table; pass one or choose weak_correlation mode")
    return table
