"""Compiled and pure-numpy quadrature-row kernels must agree."""

import numpy as np
import pytest

from giantatom.numerics import _kernels
from giantatom.numerics._kernels import _lattice_rows_numpy, lattice_rows


def _random_inputs(rng, n=257, m=19, s=5):
    nodes = np.linspace(-8.0, 8.0, n)
    weights = np.full(n, nodes[1] - nodes[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    jstar = rng.integers(s, n - s, size=m)
    j0 = jstar - s // 2
    d1 = rng.standard_normal((m, s))
    log_plus = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return nodes, weights, jstar, j0, d1, log_plus


class TestLatticeRows:
    def test_numpy_rows_apply_cauchy_rule(self):
        # For a function vanishing at the window edges the assembled row
        # must reproduce an adaptive principal-value quadrature plus the
        # i*pi residue folded into log_plus.
        from scipy.integrate import quad
        n = 2001
        nodes = np.linspace(-10.0, 10.0, n)
        h = nodes[1] - nodes[0]
        weights = np.full(n, h)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        jstar = np.array([n // 2 + 40])
        p = nodes[jstar[0]]
        # five-point centered first-derivative stencil
        s = 5
        j0 = jstar - 2
        d1 = (np.array([[1.0, -8.0, 0.0, 8.0, -1.0]]) / (12.0 * h))
        k_max = nodes[-1]
        log_plus = np.array([np.log((k_max - p) / (k_max + p)) + 1j * np.pi],
                            dtype=complex)

        f = np.exp(-0.5 * nodes ** 2) * (1.0 + 0.3 * np.sin(nodes))
        got = (_lattice_rows_numpy(nodes, weights, jstar, j0, d1,
                                   log_plus) @ f)[0]

        pv = quad(lambda q: np.exp(-0.5 * q * q) * (1 + 0.3 * np.sin(q)),
                  -10.0, 10.0, weight="cauchy", wvar=p, limit=400)[0]
        want = pv + 1j * np.pi * f[jstar[0]]
        assert abs(got - want) < 1e-6

    @pytest.mark.skipif(not _kernels.USE_NUMBA,
                        reason="numba backend not active")
    def test_jit_matches_numpy_on_random_data(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            args = _random_inputs(rng)
            ref = _lattice_rows_numpy(*args)
            jit = _kernels._lattice_rows_jit(
                np.ascontiguousarray(args[0]),
                np.ascontiguousarray(args[1]),
                np.ascontiguousarray(args[2], dtype=np.int64),
                np.ascontiguousarray(args[3], dtype=np.int64),
                np.ascontiguousarray(args[4]),
                np.ascontiguousarray(args[5], dtype=np.complex128))
            np.testing.assert_allclose(jit, ref, rtol=1e-13, atol=1e-13)

    def test_dispatch_returns_expected_shape(self):
        rng = np.random.default_rng(11)
        args = _random_inputs(rng, n=129, m=7)
        rows = lattice_rows(*args)
        assert rows.shape == (7, 129)
        np.testing.assert_allclose(rows, _lattice_rows_numpy(*args),
                                   rtol=1e-13, atol=1e-13)
