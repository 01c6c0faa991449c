"""Complex Lambert W function on arbitrary branches via Halley iteration.

Seeds follow the standard recipe: the branch-point series near ``-1/e`` for
branches 0 and -1, the Taylor series near the origin on the principal
branch, and the asymptotic two-term logarithm elsewhere (Corless et al.,
"On the Lambert W function", Adv. Comput. Math. 5, 1996).
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from ..errors import NoConvergenceError

_BRANCH_POINT = -1.0 / math.e
_MAX_ITER = 100


def _seed(z: complex, branch: int) -> complex:
    if branch in (0, -1):
        p2 = 2.0 * (math.e * z + 1.0)
        if abs(p2) < 0.5:
            # Series around the branch point z = -1/e.
            p = cmath.sqrt(p2)
            if branch == -1:
                p = -p
            return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if branch == 0:
        if abs(z) < 0.5:
            # Taylor series around the origin.
            return z * (1.0 - z + 1.5 * z * z)
        if abs(z) < 4.0 and abs(1.0 + z) > 0.3:
            # log1p tracks the principal branch well at moderate size.
            return cmath.log(1.0 + z)
    if branch == -1 and z.imag == 0.0 and _BRANCH_POINT < z.real < 0.0:
        # Real lower branch on (-1/e, 0).
        l1 = math.log(-z.real)
        return complex(l1 - math.log(-l1))
    # Asymptotic seed: log(z) on the shifted branch.
    lz = cmath.log(z) + 2j * math.pi * branch
    if abs(lz) < 1e-300:
        lz = 1e-300
    return lz - cmath.log(lz)


def lambert_w(z, branch: int = 0, tol: float = 1e-12):
    """Branch ``branch`` of the Lambert W function.

    Guarantees ``|W e^W - z| <= tol * max(1, |z|)`` or raises
    :class:`NoConvergenceError`.  Scalar or array input.
    """
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    flat = np.atleast_1d(z_arr).ravel()
    out = np.empty_like(flat)
    for i, zi in enumerate(flat):
        out[i] = _lambert_w_scalar(complex(zi), branch, tol)
    if scalar:
        return complex(out[0])
    return out.reshape(z_arr.shape)


def _lambert_w_scalar(z: complex, branch: int, tol: float) -> complex:
    if z == 0.0:
        if branch == 0:
            return 0.0 + 0.0j
        raise ValueError("W_n(0) diverges for n != 0")
    if branch in (0, -1) and abs(z - _BRANCH_POINT) < 1e-300:
        return -1.0 + 0.0j
    w = _seed(z, branch)
    target = tol * max(1.0, abs(z))
    for _ in range(_MAX_ITER):
        ew = cmath.exp(w)
        res = w * ew - z
        if abs(res) <= target:
            return w
        wp1 = w + 1.0
        # Halley step.
        denom = ew * wp1 - (w + 2.0) * res / (2.0 * wp1)
        if denom == 0.0:
            break
        w = w - res / denom
    res = abs(w * cmath.exp(w) - z)
    if res <= target:
        return w
    raise NoConvergenceError(
        f"Lambert W branch {branch} failed at z={z!r}", residuals=[res])
