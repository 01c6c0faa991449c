"""Few-photon scattering amplitudes built from the dressed resolvent.

Single-photon amplitudes are closed-form.  Two- and three-photon connected
amplitudes are assembled from the dressed resolvent, difference quotients of
its inverse (which remove all kinematic pole cancellations analytically),
the smooth pair-vertex tables and, in exact mode, the exchange remainder.

Conventions: all incoming photons are taken in channel 1 at carrier
momentum (relative momentum zero), so the total energy of every connected
block is zero and outgoing momenta sum to zero.  Channel indices enter only
through external coupling factors; the reduced amplitudes underneath are
channel-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (ModelParams, coupling, dressed_green,
                    inverse_dressed_green, inverse_dressed_green_deriv)
from .vertex import F11Family, F12Table, VertexTable, require_f12

# Relative half-width of the central-difference window used for the
# removable singularity of the non-symmetric three-photon term.
_B_LIMIT_FRACTION = 1e-4


def single_photon_s(params: ModelParams, k, mu_out: int, mu_in: int):
    """Single-photon scattering amplitude ``S_{mu_out, mu_in}(k)``."""
    k = np.asarray(k, dtype=float)
    delta = 1.0 if mu_out == mu_in else 0.0
    val = delta - 2j * np.pi * np.conj(coupling(params, mu_in, k)) \
        * coupling(params, mu_out, k) * dressed_green(params, k)
    return val if val.ndim else complex(val)


def single_photon_matrix(params: ModelParams, k):
    """2x2 channel matrix of :func:`single_photon_s` at one momentum."""
    return np.array([[single_photon_s(params, k, m_out, m_in)
                      for m_in in (1, 2)] for m_out in (1, 2)])


def _green_inv_dq(params: ModelParams, a, b, scale: float):
    """Vectorized ``(Ginv(a) - Ginv(b)) / (a - b)`` with coincidence limit."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a - b
    thr = 1e-6 * np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)
    safe = np.abs(d) > thr
    dd = np.where(safe, d, 1.0)
    direct = (inverse_dressed_green(params, a)
              - inverse_dressed_green(params, b)) / dd
    limit = inverse_dressed_green_deriv(params, 0.5 * (a + b))
    out = np.where(safe, direct, limit)
    return out if out.ndim else complex(out)


def _green_dq(params: ModelParams, a, b, scale: float):
    """Vectorized ``(Gd(a) - Gd(b)) / (a - b)`` with coincidence limit."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a - b
    thr = 1e-6 * np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)
    safe = np.abs(d) > thr
    dd = np.where(safe, d, 1.0)
    direct = (dressed_green(params, a) - dressed_green(params, b)) / dd
    m = 0.5 * (a + b)
    limit = -inverse_dressed_green_deriv(params, m) \
        * dressed_green(params, m) ** 2
    out = np.where(safe, direct, limit)
    return out if out.ndim else complex(out)


def pair_m_reduced(params: ModelParams, table0: VertexTable, k):
    """Symmetrized reduced pair amplitude ``m(k)`` (couplings stripped).

    ``m(k) = Gd(0) [ (Gd(k) - Gd(-k)) / (2k)
                     + (Gd(k) S(-k) + Gd(-k) S(k)) / 2 ]``

    with ``S(x) = S(x, 0; 0)`` the smooth pair-vertex column; the
    principal-value pole of the unsymmetrized amplitude cancels exactly in
    the symmetrization, leaving a regular function of ``k``.
    """
    k = np.asarray(k, dtype=float)
    g0 = dressed_green(params, 0.0)
    gp = dressed_green(params, k)
    gm = dressed_green(params, -k)
    sp = table0.smooth_at(k, 0.0)
    sm = table0.smooth_at(-k, 0.0)
    dq = _green_dq(params, k, -k, params.gamma)
    val = g0 * (dq + 0.5 * (gp * sm + gm * sp))
    return val if np.ndim(val) else complex(val)


def pair_m(params: ModelParams, table0: VertexTable, k,
           mu_a: int = 1, mu_b: int = 1):
    """Channel-resolved symmetrized pair amplitude ``M_{mu_a mu_b}(k)``.

    The outgoing pair carries momenta ``(k, -k)`` in channels
    ``(mu_a, mu_b)``; both incoming photons are channel 1 at the carrier.
    """
    pref = np.conj(coupling(params, mu_a, k)) \
        * np.conj(coupling(params, mu_b, -np.asarray(k, dtype=float))) \
        * coupling(params, 1, 0.0) ** 2
    return pref * pair_m_reduced(params, table0, k)


def two_photon_connected_t(params: ModelParams, table0: VertexTable, k,
                           mu_a: int = 1, mu_b: int = 1):
    """Unsymmetrized connected pair transition amplitude split off its pole.

    Returns ``(pv_weight, smooth)`` such that the amplitude equals
    ``pv_weight * PV(1/k) + smooth``; the principal-value part is kept
    symbolic because downstream integrals treat it analytically.
    """
    k = np.asarray(k, dtype=float)
    pref = np.conj(coupling(params, mu_a, k)) \
        * np.conj(coupling(params, mu_b, -k)) \
        * coupling(params, 1, 0.0) ** 2
    g0 = dressed_green(params, 0.0)
    gk = dressed_green(params, k)
    pv_weight = pref * gk * g0
    smooth = pref * gk * g0 * table0.smooth_at(-k, 0.0)
    return pv_weight, smooth


def _bracket_b(params: ModelParams, family: F11Family, k1, k2, k3,
               scale: float):
    """Numerator of the non-symmetric three-photon term (vanishes at k1=0).

    All appearances of ``k2 + k3`` are written as ``-k1`` so the expression
    stays consistent when ``k1`` is varied with ``k3`` held fixed and
    ``k2 = -k3 - k1`` (the direction along which the removable limit is
    taken).
    """
    g = lambda x: dressed_green(params, x)
    g0 = g(0.0)
    dq_a = -_green_inv_dq(params, np.zeros_like(np.asarray(k2, dtype=float)),
                          -np.asarray(k2, dtype=float), scale)
    dq_b = -_green_inv_dq(params, np.zeros_like(np.asarray(k3, dtype=float)),
                          np.asarray(k3, dtype=float), scale)
    s_e0 = family.smooth(k2, 0.0)
    s_em = family.smooth(k2, -np.asarray(k1, dtype=float))
    return (g0 ** 2 * g(k3) * (g(k1) * dq_a - g0 * dq_b)
            + g(k1) * g0 * g(-np.asarray(k2, dtype=float)) * s_e0
            - g0 * g(k3) * g(-np.asarray(k1, dtype=float)) * s_em)


def three_photon_t_reduced(params: ModelParams, family: F11Family,
                           f12: F12Table, k1, k2, k3, mode: str = "exact"):
    """Reduced connected three-photon amplitude at total energy zero.

    ``(k1, k2, k3)`` are outgoing momenta with ``k1 + k2 + k3 = 0``; the
    external coupling factors are applied by :func:`three_photon_t`.  In
    ``weak_correlation`` mode the exchange remainder is dropped.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    k3 = np.asarray(k3, dtype=float)
    scale = params.gamma
    g = lambda x: dressed_green(params, x)
    g0 = g(0.0)

    # Fully difference-quotient term.
    dq1 = -_green_inv_dq(params, k2, -k1, scale)
    dq2 = -_green_inv_dq(params, np.zeros_like(k1), -k1, scale)
    term_a = g(k3) * g0 ** 2 * g(-k1) * g(k2) * dq1 * dq2

    # Removable-singularity term: bracket/k1 with a central-difference
    # limit where |k1| falls below the window.
    delta0 = _B_LIMIT_FRACTION * scale
    bracket = _bracket_b(params, family, k1, k2, k3, scale)
    small = np.abs(k1) < delta0
    if np.any(small):
        k3s = np.broadcast_to(k3, np.broadcast(k1, k2, k3).shape)[small]
        up = _bracket_b(params, family, np.full_like(k3s, delta0),
                        -k3s - delta0, k3s, scale)
        dn = _bracket_b(params, family, np.full_like(k3s, -delta0),
                        -k3s + delta0, k3s, scale)
        term_b = np.empty(np.broadcast(k1, k2, k3).shape, dtype=complex)
        ok = ~small
        kk1 = np.broadcast_to(k1, term_b.shape)
        term_b[ok] = np.broadcast_to(bracket, term_b.shape)[ok] / kk1[ok]
        term_b[small] = (up - dn) / (2.0 * delta0)
    else:
        term_b = bracket / np.where(k1 == 0, 1.0, k1)

    # Pair-vertex product term.
    term_c = g0 * g(k1) * family.smooth(k2, -k3) * g(-k3) \
        * family.smooth(k3, 0.0)

    total = term_a + term_b + term_c
    if mode == "exact":
        table = require_f12(f12, mode)
        total = total + g0 * g(k1) * table.at(k2, k3)
    return total if np.ndim(total) else complex(total)


def symmetrized_q_reduced(params: ModelParams, family: F11Family,
                          f12: F12Table, k1, k2, k3, mode: str = "exact"):
    """Outgoing-momentum symmetrization of the reduced triple amplitude."""
    perms = ((k1, k2, k3), (k1, k3, k2), (k2, k1, k3),
             (k2, k3, k1), (k3, k1, k2), (k3, k2, k1))
    acc = 0.0
    for a, b, c in perms:
        acc = acc + three_photon_t_reduced(params, family, f12, a, b, c,
                                           mode)
    return acc / 6.0


def three_photon_t(params: ModelParams, family: F11Family, f12: F12Table,
                   k1, k2, k3, channels=(1, 1, 1), mode: str = "exact"):
    """Channel-resolved connected three-photon amplitude (unsymmetrized)."""
    pref = np.conj(coupling(params, channels[0], k1)) \
        * np.conj(coupling(params, channels[1], k2)) \
        * np.conj(coupling(params, channels[2], k3)) \
        * coupling(params, 1, 0.0) ** 3
    return pref * three_photon_t_reduced(params, family, f12, k1, k2, k3,
                                         mode)


@dataclass(frozen=True)
class AmplitudeSet:
    """All reduced amplitudes needed by the observables at one parameter set.

    ``m_nodes`` is the symmetrized reduced pair amplitude on the momentum
    lattice; ``q_nodes`` the symmetrized reduced triple amplitude on the
    lattice product ``(k_i, q_j, -k_i - q_j)`` (``None`` unless built by a
    three-photon computation).
    """

    params: ModelParams
    mode: str
    table0: VertexTable
    m_nodes: np.ndarray
    family: F11Family = None
    f12: F12Table = None
    q_nodes: np.ndarray = None


def build_pair_amplitudes(params: ModelParams, table0: VertexTable
                          ) -> AmplitudeSet:
    """Reduced pair amplitude sampled on the vertex lattice."""
    m = pair_m_reduced(params, table0, table0.grid.nodes)
    return AmplitudeSet(params, table0.mode, table0, m)


def build_triple_amplitudes(params: ModelParams, family: F11Family,
                            table0: VertexTable, f12: F12Table,
                            mode: str = "exact") -> AmplitudeSet:
    """Reduced pair and symmetrized triple amplitudes on the lattice."""
    grid = table0.grid
    m = pair_m_reduced(params, table0, grid.nodes)
    kk, qq = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    q = symmetrized_q_reduced(params, family, f12, -kk - qq, kk, qq, mode)
    return AmplitudeSet(params, mode, table0, m, family, f12, q)
