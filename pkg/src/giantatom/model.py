"""Model definition: a driven two-level emitter coupled to a two-channel
continuum at two spatially separated legs.

Conventions
-----------
* Group velocity is 1, so momentum and frequency coincide and the leg
  separation ``R`` doubles as the inter-leg delay time.
* Momenta are measured relative to the carrier, whose only surviving trace
  is the phase ``carrier_phase = k0*R (mod 2pi)`` picked up between legs.
* Channel index ``mu`` is 1 or 2 with chirality sign ``+1`` / ``-1``.
* ``gamma`` is the per-direction decay scale; the symmetric two-leg emitter
  at zero separation relaxes with total rate ``2*gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import NoConvergenceError, PoleProximityError

TWO_PI = 2.0 * math.pi

# Pole guard for the dressed propagator denominator.
POLE_FLOOR = 1e-14


@dataclass(frozen=True)
class ComplexEnergy:
    """Energy argument with an explicit non-negative regulator.

    ``value`` may itself be complex (analytic continuation); ``eta`` is an
    additional upward shift used only where a limiting prescription must be
    spelled out.
    """

    value: complex
    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0.0:
            raise ValueError("eta must be non-negative")

    @property
    def z(self) -> complex:
        return complex(self.value) + 1j * self.eta


def _as_energy(eps) -> complex:
    if isinstance(eps, ComplexEnergy):
        return eps.z
    return eps


@dataclass(frozen=True)
class ModelParams:
    """Static emitter/waveguide parameters.

    Parameters
    ----------
    gamma : float
        Overall coupling rate scale (> 0).
    leg_separation : float
        Distance ``R`` between the two coupling legs (>= 0).
    carrier_phase : float
        ``k0*R`` reduced modulo ``2*pi``.  Stored instead of ``k0`` because
        every formula depends on the carrier only through this phase.
    detuning : float
        Emitter detuning from the carrier.
    gamma1_fraction : float
        Fraction of ``gamma`` assigned to the first leg; ``0.5`` is the
        symmetric emitter for which the couplings are real and identical in
        both channels.
    num_channels : int
        Number of chiral channels (fixed to 2).
    """

    gamma: float
    leg_separation: float = 0.0
    carrier_phase: float = 0.0
    detuning: float = 0.0
    gamma1_fraction: float = 0.5
    num_channels: int = 2

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive and finite")
        if self.leg_separation < 0.0:
            raise ValueError("leg_separation must be non-negative")
        if not (0.0 <= self.gamma1_fraction <= 1.0):
            raise ValueError("gamma1_fraction must lie in [0, 1]")
        if self.num_channels != 2:
            raise ValueError("only the two-channel model is supported")
        phase = self.carrier_phase % TWO_PI
        if self.leg_separation == 0.0 and min(phase, TWO_PI - phase) > 1e-12:
            # The phase is accumulated over the leg separation, so it must
            # vanish with it.
            raise ValueError("carrier_phase must be 0 when leg_separation=0")
        object.__setattr__(self, "carrier_phase", phase)

    @property
    def gamma1(self) -> float:
        return self.gamma * self.gamma1_fraction

    @property
    def gamma2(self) -> float:
        return self.gamma * (1.0 - self.gamma1_fraction)

    @property
    def cross_rate(self) -> float:
        """Interference rate ``2*sqrt(gamma1*gamma2)``; equals ``gamma`` for
        the symmetric emitter."""
        return 2.0 * math.sqrt(self.gamma1 * self.gamma2)


def channel_sign(mu: int) -> int:
    """Chirality sign of channel ``mu`` (1 -> +1, 2 -> -1)."""
    if mu not in (1, 2):
        raise ValueError("channel index must be 1 or 2")
    return 1 if mu == 1 else -1


def coupling(params: ModelParams, mu: int, k):
    """Momentum-dependent emitter-channel coupling ``g_mu(k)``.

    Two-leg structure: each leg contributes its amplitude with the phase
    accumulated between the emitter center and the leg.  For the symmetric
    emitter this reduces to ``sqrt(gamma/pi) * cos((k*R + carrier_phase)/2)``,
    real and channel independent.
    """
    c = channel_sign(mu)
    k = np.asarray(k, dtype=complex) if np.ndim(k) else complex(k)
    half = 0.5 * (k * params.leg_separation + params.carrier_phase)
    a1 = math.sqrt(params.gamma1 / TWO_PI)
    a2 = math.sqrt(params.gamma2 / TWO_PI)
    return a1 * np.exp(-1j * c * half) + a2 * np.exp(1j * c * half)


def coupling_density(params: ModelParams, q):
    """Channel-summed coupling weight ``sum_mu |g_mu(q)|^2`` for real ``q``.

    Equals ``(gamma + cross_rate*cos(q*R + carrier_phase)) / pi``.
    """
    q = np.asarray(q, dtype=float) if np.ndim(q) else float(q)
    return (params.gamma + params.cross_rate
            * np.cos(q * params.leg_separation + params.carrier_phase)) / math.pi


def self_energy(params: ModelParams, eps):
    """Closed-form level-shift function of the emitter.

    ``Sigma(eps) = -i*(gamma + cross_rate * exp(i*(eps*R + carrier_phase)))``.
    Reduces to the separation-independent ``-2i*gamma`` for the symmetric
    emitter at ``R = 0``.  Analytic in the upper half-plane.
    """
    z = _as_energy(eps)
    z = np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)
    phase = np.exp(1j * (z * params.leg_separation + params.carrier_phase))
    return -1j * (params.gamma + params.cross_rate * phase)


def _tail_cos_over_linear(params: ModelParams, z: complex, k_cut: float) -> complex:
    """Exact tails ``int_{|q|>K} cos(q R + phi)/(z - q) dq`` via E1.

    Valid for ``Im z >= 0``; for real ``z`` the (interior) pole does not lie
    in the tails, so these are ordinary convergent oscillatory integrals.
    """
    R = params.leg_separation
    phi = params.carrier_phase
    K = k_cut
    e1 = special.exp1
    # int_K^inf e^{+iqR}/(q-z) dq = e^{izR} E1(-iR(K-z))
    # int_K^inf e^{-iqR}/(q-z) dq = e^{-izR} E1(+iR(K-z))
    # int_{-inf}^{-K} e^{+iqR}/(q-z) dq = -e^{izR} E1(+iR(K+z))
    # int_{-inf}^{-K} e^{-iqR}/(q-z) dq = -e^{-izR} E1(-iR(K+z))
    up_p = np.exp(1j * z * R) * e1(-1j * R * (K - z))
    up_m = np.exp(-1j * z * R) * e1(1j * R * (K - z))
    lo_p = -np.exp(1j * z * R) * e1(1j * R * (K + z))
    lo_m = -np.exp(-1j * z * R) * e1(-1j * R * (K + z))
    # cos(qR+phi) = (e^{i phi} e^{iqR} + e^{-i phi} e^{-iqR}) / 2,
    # and 1/(z-q) = -1/(q-z).
    total = 0.5 * (np.exp(1j * phi) * (up_p + lo_p)
                   + np.exp(-1j * phi) * (up_m + lo_m))
    return -complex(total)


def self_energy_numeric(params: ModelParams, eps, k_cut: float = 600.0,
                        rtol: float = 1e-8) -> complex:
    """Level-shift function from direct quadrature of the coupling density.

    Independent validation route for :func:`self_energy`: integrates
    ``sum_mu |g_mu(q)|^2 / (eps - q + i0)`` over the real line with the
    on-axis pole split into principal value plus residue and the oscillatory
    tails beyond ``k_cut`` summed in closed form.

    Raises
    ------
    NoConvergenceError
        If doubling the cutoff moves the answer by more than ``rtol``.
    """
    z = complex(_as_energy(eps))
    if z.imag < 0.0:
        raise ValueError("self_energy_numeric requires Im(eps) >= 0")

    def rho(q):
        return coupling_density(params, q)

    R = params.leg_separation
    phi = params.carrier_phase
    a = params.gamma / math.pi
    b = params.cross_rate / math.pi
    x = z.real
    y = z.imag

    def seg_flat(lo: float, hi: float) -> complex:
        # int_lo^hi dq/(z - q), the pole lying outside (lo, hi) or off-axis.
        if y == 0.0:
            return math.log(abs(x - lo)) - math.log(abs(x - hi))
        return np.log(z - lo) - np.log(z - hi)

    def seg_osc(lo: float, hi: float) -> complex:
        # int_lo^hi cos(qR + phi)/(z - q) dq via oscillatory-weight rules.
        if hi <= lo:
            return 0.0
        out = 0.0 + 0.0j
        for trig, weight in ((math.cos(phi), "cos"), (-math.sin(phi), "sin")):
            if trig == 0.0:
                continue
            re, _ = integrate.quad(lambda q: (1.0 / (z - q)).real, lo, hi,
                                   weight=weight, wvar=R, limit=400)
            part = re + 0.0j
            if y != 0.0:
                im, _ = integrate.quad(lambda q: (1.0 / (z - q)).imag, lo, hi,
                                       weight=weight, wvar=R, limit=400)
                part = re + 1j * im
            out += trig * part
        return out

    def at_cut(K: float) -> complex:
        if abs(x) > 0.5 * K:
            raise ValueError("cutoff too small for requested energy")
        W = min(10.0, 0.4 * K)
        lo, hi = x - W, x + W
        rho_x = float(rho(x))
        h = 1e-5 * max(1.0, abs(x))
        drho_x = float((rho(x + h) - rho(x - h)) / (2.0 * h))

        # Pole window: subtract the density's zeroth- and first-order terms
        # at the pole so the remainder vanishes quadratically there and
        # keeps no structure at the scale of Im(z); the subtracted terms
        # integrate in closed form.
        def reg(q):
            return (rho(q) - rho_x - drho_x * (q - x)) / (z - q)

        re, _ = integrate.quad(lambda q: reg(q).real, lo, hi,
                               points=[x], limit=400)
        window = re + 0.0j
        if y != 0.0:
            im, _ = integrate.quad(lambda q: reg(q).imag, lo, hi,
                                   points=[x], limit=400)
            window = re + 1j * im
            log_span = np.log(z - lo) - np.log(z - hi)
        else:
            # Symmetric window: the log magnitudes cancel, leaving the
            # half-circle residue.
            log_span = -1j * math.pi
        window += rho_x * log_span \
            + drho_x * ((z - x) * log_span - (hi - lo))

        # Side intervals: flat part in closed form, oscillatory part by
        # cos/sin-weighted quadrature.
        sides = a * (seg_flat(-K, lo) + seg_flat(hi, K))
        if b != 0.0 and R > 0.0:
            sides += b * (seg_osc(-K, lo) + seg_osc(hi, K))

        # Exact tails beyond the cutoff.
        if y == 0.0:
            tail_flat = a * math.log((K - x) / (K + x))
        else:
            tail_flat = -1j * a * math.pi - a * (np.log(z + K)
                                                 - np.log(z - K))
        if b == 0.0 or R == 0.0:
            # Constant density: the cos term is a constant weight.
            scale = math.cos(phi) * b / a if a else 0.0
            flat_side_osc = (seg_flat(-K, lo) + seg_flat(hi, K)) * b \
                * math.cos(phi) if R == 0.0 and b != 0.0 else 0.0
            return window + sides + flat_side_osc + tail_flat * (1.0 + scale)
        tail_osc = b * _tail_cos_over_linear(params, z, K)
        return window + sides + tail_flat + tail_osc

    first = at_cut(k_cut)
    second = at_cut(2.0 * k_cut)
    scale = max(abs(second), params.gamma)
    if abs(first - second) > rtol * scale:
        raise NoConvergenceError(
            "self-energy quadrature did not converge under cutoff doubling",
            residuals=[abs(first - second)])
    return second


def inverse_dressed_green(params: ModelParams, eps):
    """Inverse dressed emitter propagator ``eps + detuning - Sigma(eps)``."""
    z = _as_energy(eps)
    z = np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)
    return z + params.detuning - self_energy(params, z)


def inverse_dressed_green_deriv(params: ModelParams, eps):
    """Energy derivative of :func:`inverse_dressed_green` (analytic)."""
    z = _as_energy(eps)
    z = np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)
    R = params.leg_separation
    phase = np.exp(1j * (z * R + params.carrier_phase))
    return 1.0 - params.cross_rate * R * phase


def dressed_green(params: ModelParams, eps, floor: float = POLE_FLOOR):
    """Dressed emitter propagator with an explicit pole guard."""
    denom = inverse_dressed_green(params, eps)
    small = np.abs(denom) < floor
    if np.any(small):
        raise PoleProximityError(
            f"dressed propagator denominator below {floor:g}")
    return 1.0 / denom


# ---------------------------------------------------------------------------
# Emitter poles
# ---------------------------------------------------------------------------

# Residual threshold for accepting a Lambert-W pole candidate.
POLE_RESIDUAL_TOL = 1e-8


def emitter_poles(params: ModelParams, branches=(-1, 0, 1),
                  residual_tol: float = POLE_RESIDUAL_TOL) -> list:
    """Complex momenta where the inverse dressed resolvent vanishes.

    Candidates come from both sign conventions of the Lambert-W reduction
    of the transcendental pole condition; spurious candidates are filtered
    by the residual of the defining equation and deduplicated.
    """
    from .numerics.lambertw import lambert_w

    gam, r, delta = params.gamma, params.leg_separation, params.detuning
    cross = params.cross_rate
    if r == 0.0:
        return [complex(-delta, -2.0 * gam)]
    phase = params.carrier_phase
    out = []
    # Ginv(k) = k + delta + i gamma + i cross e^{i(kR + phase)} = 0.
    # With w = -i R (k + delta + i gamma):
    #   w e^w = +- cross R exp(i phase - i R delta + gamma R) ... both sign
    # conventions are tried and verified by direct residual.
    base = cross * r * np.exp(1j * phase) * np.exp(-1j * r * delta + gam * r)
    for sign in (1.0, -1.0):
        z = sign * base
        for branch in branches:
            try:
                w = lambert_w(complex(z), branch)
            except (ValueError, NoConvergenceError):
                continue
            k = 1j * w / r - delta - 1j * gam
            res = abs(inverse_dressed_green(params, complex(k)))
            scale = max(1.0, abs(k))
            if res < residual_tol * scale:
                out.append(complex(k))
    # Deduplicate.
    uniq = []
    for k in sorted(out, key=lambda z: (round(z.real, 9), round(z.imag, 9))):
        if not any(abs(k - u) < 1e-9 * max(1.0, abs(k)) for u in uniq):
            uniq.append(k)
    return uniq
