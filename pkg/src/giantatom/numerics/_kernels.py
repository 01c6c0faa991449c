"""Hot numerical kernels with an optional compiled (numba) backend.

The O(n^2) assembly of lattice-pole quadrature rows dominates vertex setup
time.  A jitted version is used when numba is importable; set the
environment variable ``GIANTATOM_NUMBA=0`` to force the pure-numpy fallback
(both paths produce bit-identical results up to floating-point associativity
inside the row sums, and are cross-checked in the test suite).
"""

from __future__ import annotations

import os

import numpy as np


def _numba_enabled() -> bool:
    flag = os.environ.get("GIANTATOM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


USE_NUMBA = _numba_enabled()
if USE_NUMBA:
    try:
        os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
        import numba
    except ImportError:  # pragma: no cover - environment dependent
        USE_NUMBA = False


def _lattice_rows_numpy(nodes, weights, jstar, j0, d1_stencils, log_plus):
    """Quadrature rows for poles sitting exactly on grid nodes.

    Parameters
    ----------
    nodes, weights : (n,) float arrays.
    jstar : (m,) int array — node index of each pole.
    j0 : (m,) int array — leftmost index of each interpolation window.
    d1_stencils : (m, s) float array — first-derivative stencil weights.
    log_plus : (m,) complex array — endpoint log factor plus the residue
        term for each pole.

    Returns
    -------
    rows : (m, n) complex array with ``A(p_i) ~= rows[i] @ f_nodes``.
    """
    m = jstar.size
    s = d1_stencils.shape[1]
    diffs = nodes[None, :] - nodes[jstar][:, None]
    diffs[np.arange(m), jstar] = np.inf
    rows = (weights[None, :] / diffs).astype(complex)
    coeff = log_plus - rows.sum(axis=1)
    cols = j0[:, None] + np.arange(s)[None, :]
    rows[np.arange(m)[:, None], cols] += \
        weights[jstar][:, None] * d1_stencils
    rows[np.arange(m), jstar] += coeff
    return rows


if USE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def _lattice_rows_jit(nodes, weights, jstar, j0, d1_stencils, log_plus):
        m = jstar.size
        n = nodes.size
        s = d1_stencils.shape[1]
        rows = np.empty((m, n), dtype=np.complex128)
        for i in numba.prange(m):
            js = jstar[i]
            p = nodes[js]
            acc = 0.0
            for j in range(n):
                if j == js:
                    rows[i, j] = 0.0
                else:
                    v = weights[j] / (nodes[j] - p)
                    rows[i, j] = v
                    acc += v
            w = weights[js]
            for t in range(s):
                rows[i, j0[i] + t] += w * d1_stencils[i, t]
            rows[i, js] += log_plus[i] - acc
        return rows


def lattice_rows(nodes, weights, jstar, j0, d1_stencils, log_plus):
    """Dispatch to the compiled kernel when available."""
    if USE_NUMBA:
        return _lattice_rows_jit(
            np.ascontiguousarray(nodes), np.ascontiguousarray(weights),
            np.ascontiguousarray(jstar, dtype=np.int64),
            np.ascontiguousarray(j0, dtype=np.int64),
            np.ascontiguousarray(d1_stencils),
            np.ascontiguousarray(log_plus, dtype=np.complex128))
    return _lattice_rows_numpy(nodes, weights, jstar, j0,
                               d1_stencils, log_plus)
