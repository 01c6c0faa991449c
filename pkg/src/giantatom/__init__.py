"""Few-photon scattering engine for a two-leg waveguide emitter with
delayed feedback between the legs."""

from .model import (ComplexEnergy, ModelParams, channel_sign, coupling,
                    coupling_density, dressed_green, inverse_dressed_green,
                    inverse_dressed_green_deriv, self_energy,
                    self_energy_numeric)
from .numerics import (MomentumGrid, TailSpec, fit_tail, fourier_2d,
                       fourier_oscillatory, lambert_w, pv_integrate,
                       safe_difference_quotient)

__version__ = "0.1.0"

from .vertex import (F11Family, F12Table, VertexTable, born_f11_column,
                     solve_f11, solve_f11_family, solve_f12)
from .scattering import (build_pair_amplitudes, build_triple_amplitudes,
                         pair_m, pair_m_reduced, single_photon_s,
                         single_photon_matrix, three_photon_t,
                         three_photon_t_reduced, two_photon_connected_t,
                         symmetrized_q_reduced)
from .observables import (coherence2, coherence3, detect_kinks,
                          detuning_scan, emitter_poles, spectral_density,
                          spectral_peaks)
