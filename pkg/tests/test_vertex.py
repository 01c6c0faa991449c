"""Tests for the pair-vertex solver and the exchange remainder."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from giantatom.errors import (GridTooCoarseError, MissingF12Error,
                              SingularSystemError)
from giantatom.model import ModelParams
from giantatom.numerics.grids import MomentumGrid
from giantatom.vertex import (F12Table, born_f11_column, free_matrix,
                              kernel_matrix, pair_density, require_f12,
                              solve_f11, solve_f11_family, solve_f12,
                              _factor_with_condition_check)


def _params(gamma=0.8, R=1.0, phase=math.pi / 3, detuning=0.1):
    return ModelParams(gamma=gamma, leg_separation=R, carrier_phase=phase,
                       detuning=detuning)


def _cauchy_integral(params, grid, energy, pole):
    """Oracle for A(p) = int h(q) / (q - p - i0) dq by adaptive PV quadrature."""
    def h(q):
        return pair_density(params, MomentumGrid.__new__(MomentumGrid),
                            energy) if False else None

    # evaluate h pointwise without a grid
    from giantatom.model import coupling_density, dressed_green

    def hfun(q):
        return coupling_density(params, q) * dressed_green(params, energy - q)

    a, b = -grid.k_max, grid.k_max
    re = quad(lambda q: hfun(q).real, a, b, weight="cauchy", wvar=pole,
              limit=400)[0]
    im = quad(lambda q: hfun(q).imag, a, b, weight="cauchy", wvar=pole,
              limit=400)[0]
    return re + 1j * im + 1j * math.pi * hfun(pole)


class TestFreeTerm:
    def test_against_adaptive_quadrature(self):
        params = _params()
        grid = MomentumGrid(10.0, 241)
        energy = 0.37
        cmat = free_matrix(params, grid, energy)
        # off-diagonal entries are divided differences of the Cauchy integral
        for i, j in [(40, 170), (120, 60), (5, 235)]:
            x, k = grid.nodes[i], grid.nodes[j]
            a_x = _cauchy_integral(params, grid, energy, energy - x)
            a_k = _cauchy_integral(params, grid, energy, energy - k)
            want = (a_x - a_k) / (k - x)
            assert abs(cmat[i, j] - want) < 1e-5 * max(1.0, abs(want))

    def test_symmetric(self):
        params = _params()
        grid = MomentumGrid(8.0, 161)
        cmat = free_matrix(params, grid, 0.0)
        np.testing.assert_allclose(cmat, cmat.T, rtol=0, atol=1e-12)

    def test_diagonal_is_coincidence_limit(self):
        params = _params()
        grid = MomentumGrid(8.0, 321)
        cmat = free_matrix(params, grid, 0.0)
        i = 160  # node at 0
        j = i + 1  # neighbouring node
        # the divided difference just off the diagonal approximates the
        # diagonal limit to O(spacing)
        assert abs(cmat[i, j] - cmat[i, i]) < 5e-2 * max(1.0, abs(cmat[i, i]))


class TestSolveF11:
    def test_smoothless_modes_are_zero(self):
        params = _params()
        grid = MomentumGrid(6.0, 61)
        for mode in ("markovian", "quasi_markovian"):
            table = solve_f11(params, grid, 0.0, mode=mode)
            assert not np.any(table.smooth)
            assert table.smooth_at(0.3, -0.2) == 0

    def test_fixed_point_residual(self):
        params = _params()
        grid = MomentumGrid(8.0, 161)
        table = solve_f11(params, grid, 0.0)
        kmat = kernel_matrix(params, grid, 0.0)
        cmat = free_matrix(params, grid, 0.0)
        resid = np.abs(table.smooth - (cmat + kmat @ table.smooth)).max()
        assert resid < 1e-10 * max(1.0, np.abs(table.smooth).max())

    def test_born_series_at_weak_coupling(self):
        params = ModelParams(gamma=0.05, leg_separation=1.0,
                             carrier_phase=math.pi / 4, detuning=0.0)
        grid = MomentumGrid(5.0, 201)
        table = solve_f11(params, grid, 0.0)
        col = table.column(0.0)
        born = born_f11_column(params, grid, 0.0, 0.0, n_terms=400)
        scale = np.abs(col).max()
        assert np.abs(col - born).max() < 1e-3 * scale

    def test_refinement_guard_raises_on_coarse_grid(self):
        params = _params(gamma=1.0)
        grid = MomentumGrid(10.0, 41)
        with pytest.raises(GridTooCoarseError):
            solve_f11(params, grid, 0.0, check_refinement=True,
                      refine_tol=1e-6)

    def test_refinement_guard_passes_on_adequate_grid(self):
        params = _params(gamma=1.0)
        grid = MomentumGrid(8.0, 321)
        solve_f11(params, grid, 0.0, check_refinement=True, refine_tol=5e-2)

    def test_singular_factorization_raises(self):
        with pytest.raises(SingularSystemError):
            _factor_with_condition_check(np.zeros((4, 4), dtype=complex))

    def test_table_spline_matches_nodes(self):
        params = _params()
        grid = MomentumGrid(6.0, 121)
        table = solve_f11(params, grid, 0.0)
        i, j = 30, 80
        val = table.smooth_at(grid.nodes[i], grid.nodes[j])
        assert abs(val - table.smooth[i, j]) < 1e-10


class TestFamily:
    def test_held_out_interpolation_error(self):
        params = _params()
        grid = MomentumGrid(5.0, 81)
        family = solve_f11_family(params, grid, workers=2)
        # interior interpolation quality; residual level is set by window
        # endpoint artifacts near the probe-region boundary
        assert family.held_out_error() < 2e-2

    def test_smoothless_family_is_zero(self):
        params = _params()
        grid = MomentumGrid(5.0, 81)
        family = solve_f11_family(params, grid, mode="markovian")
        assert not np.any(family.columns)

    def test_span_covers_pair_energies(self):
        params = _params()
        grid = MomentumGrid(5.0, 81)
        family = solve_f11_family(params, grid, workers=2)
        assert family.energies[0] <= -2 * grid.k_max
        assert family.energies[-1] >= 2 * grid.k_max


class TestF12:
    def test_solution_satisfies_fixed_point(self):
        params = _params()
        grid = MomentumGrid(6.0, 81)
        table0 = solve_f11(params, grid, 0.0)
        family = solve_f11_family(params, grid, workers=2)
        f12 = solve_f12(params, grid, family, table0)
        assert np.all(np.isfinite(f12.values))
        assert f12.residual < 1e-5

    def test_non_exact_lookup_is_zero(self):
        params = _params()
        grid = MomentumGrid(6.0, 41)
        table = F12Table(params, grid, "weak_correlation",
                         np.zeros((41, 41), dtype=complex), 0.0)
        assert table.at(0.3, -0.7) == 0

    def test_require_f12_guard(self):
        with pytest.raises(MissingF12Error):
            require_f12(None, "exact")
        assert require_f12(None, "weak_correlation") is None
