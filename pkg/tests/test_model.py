import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from giantatom.errors import PoleProximityError
from giantatom.model import (ComplexEnergy, ModelParams, coupling,
                             coupling_density, dressed_green,
                             inverse_dressed_green,
                             inverse_dressed_green_deriv, self_energy,
                             self_energy_numeric)


def sym(gamma=1.0, R=0.0, phase=0.0, delta=0.0):
    return ModelParams(gamma=gamma, leg_separation=R, carrier_phase=phase,
                       detuning=delta)


class TestCoupling:
    def test_local_limit_value(self):
        p = sym(gamma=1.0, R=0.0)
        val = coupling(p, 1, 0.0)
        assert val == pytest.approx(math.sqrt(1.0 / math.pi), abs=1e-12)
        assert abs(val - 0.5642) < 1e-4

    def test_cosine_form_symmetric(self):
        p = sym(gamma=2.0, R=3.0, phase=0.7)
        k = 0.43
        expected = math.sqrt(2.0 / math.pi) * math.cos((k * 3.0 + 0.7) / 2)
        assert coupling(p, 1, k) == pytest.approx(expected, rel=1e-12)

    def test_channel_independent_when_symmetric(self):
        p = sym(gamma=1.0, R=5.0, phase=math.pi / 4)
        k = 0.3
        assert coupling(p, 1, k) == pytest.approx(coupling(p, 2, k),
                                                  abs=1e-15)

    def test_asymmetric_channels_conjugate(self):
        p = ModelParams(gamma=1.0, leg_separation=2.0, carrier_phase=0.3,
                        gamma1_fraction=0.2)
        k = 0.9
        g1 = complex(coupling(p, 1, k))
        g2 = complex(coupling(p, 2, k))
        assert g1 == pytest.approx(np.conj(g2), rel=1e-12)

    def test_density_matches_channel_sum(self):
        p = ModelParams(gamma=1.3, leg_separation=4.0, carrier_phase=1.1,
                        gamma1_fraction=0.3)
        q = np.linspace(-5, 5, 11)
        direct = sum(np.abs(np.asarray(coupling(p, mu, q))) ** 2
                     for mu in (1, 2))
        np.testing.assert_allclose(coupling_density(p, q), direct, rtol=1e-12)


class TestSelfEnergy:
    def test_markovian_value(self):
        p = sym(gamma=1.5, R=0.0)
        for eps in (0.0, 2.3, -7.1):
            assert self_energy(p, eps) == pytest.approx(-3.0j, abs=1e-14)

    def test_closed_vs_numeric_real_axis(self):
        p = sym(gamma=1.0, R=2.0, phase=0.9, delta=0.0)
        for eps in (0.0, 1.7, -3.2):
            closed = complex(self_energy(p, eps))
            numeric = self_energy_numeric(p, eps)
            assert abs(closed - numeric) < 1e-6 * max(1.0, abs(closed))

    def test_closed_vs_numeric_asymmetric(self):
        p = ModelParams(gamma=0.8, leg_separation=1.5, carrier_phase=2.2,
                        gamma1_fraction=0.3)
        closed = complex(self_energy(p, 0.5))
        numeric = self_energy_numeric(p, 0.5)
        assert abs(closed - numeric) < 1e-6

    def test_closed_vs_numeric_local(self):
        p = sym(gamma=1.0, R=0.0)
        closed = complex(self_energy(p, 1.0))
        numeric = self_energy_numeric(p, 1.0)
        assert abs(closed - numeric) < 1e-6

    def test_phase_without_separation_rejected(self):
        with pytest.raises(ValueError):
            sym(gamma=1.0, R=0.0, phase=0.4)

    @settings(max_examples=25, deadline=None)
    @given(eps_re=st.floats(-10, 10), eps_im=st.floats(0, 1),
           R=st.floats(0.1, 6.0), phase=st.floats(0, 6.2))
    def test_closed_vs_numeric_upper_half(self, eps_re, eps_im, R, phase):
        p = sym(gamma=1.0, R=R, phase=phase)
        z = ComplexEnergy(eps_re + 1j * eps_im)
        closed = complex(self_energy(p, z))
        numeric = self_energy_numeric(p, z)
        assert abs(closed - numeric) < 1e-6 * max(1.0, abs(closed))


class TestDressedGreen:
    def test_resonant_markovian_value(self):
        p = sym(gamma=1.0, R=0.0)
        assert dressed_green(p, 0.0) == pytest.approx(1.0 / 2.0j, abs=1e-14)

    def test_pole_guard(self):
        # Drive the denominator to (numerically) zero: at the pole of the
        # local model eps = -delta - 2i gamma.
        p = sym(gamma=1.0, R=0.0, delta=0.3)
        with pytest.raises(PoleProximityError):
            dressed_green(p, ComplexEnergy(-0.3 - 2.0j))

    def test_derivative_consistent(self):
        p = sym(gamma=1.0, R=3.0, phase=0.5, delta=0.2)
        h = 1e-6
        for eps in (0.0, 1.2, -2.0):
            fd = (inverse_dressed_green(p, eps + h)
                  - inverse_dressed_green(p, eps - h)) / (2 * h)
            assert inverse_dressed_green_deriv(p, eps) == pytest.approx(
                fd, rel=1e-8)


class TestParams:
    def test_carrier_phase_normalized(self):
        p = ModelParams(gamma=1.0, leg_separation=1.0, carrier_phase=7.0)
        assert 0.0 <= p.carrier_phase < 2 * math.pi
        assert p.carrier_phase == pytest.approx(7.0 - 2 * math.pi)

    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            ModelParams(gamma=-1.0)
        with pytest.raises(ValueError):
            ModelParams(gamma=1.0, leg_separation=-2.0)
        with pytest.raises(ValueError):
            ModelParams(gamma=1.0, gamma1_fraction=1.5)
