from .grids import MomentumGrid
from .pv import (PVKernelSample, cauchy_row, cauchy_row_matrix, cauchy_value,
                 cauchy_deriv, cauchy_second, pv_integrate)
from .diffquot import safe_difference_quotient
from .lambertw import lambert_w
from .fourier import TailSpec, fit_tail, fourier_oscillatory, fourier_2d

__all__ = [
    "MomentumGrid", "PVKernelSample", "cauchy_row", "cauchy_row_matrix",
    "cauchy_value", "cauchy_deriv", "cauchy_second", "pv_integrate",
    "safe_difference_quotient", "lambert_w", "TailSpec", "fit_tail",
    "fourier_oscillatory", "fourier_2d",
]
