"""SIR/SINR distribution of the typical receiver in a Poisson field with Rayleigh fading."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

LOG2E = 1.0 / math.log(2.0)
LOG2E_SQ = LOG2E * LOG2E


class DispersionModel(str, enum.Enum):
    """Channel dispersion used in the normal approximation."""

    IID_GAUSSIAN = "iid"
    AWGN = "awgn"


@dataclass(frozen=True)
class NetworkParams:
    """Geometry and power of the network as seen from the typical receiver.

    density is the transmitter density (per m^2), link_distance the distance
    to the serving transmitter, path_loss_beta the path-loss exponent and
    inv_power the noise-to-power ratio 1/P (0 means interference-limited).
    """

    density: float
    link_distance: float = 5.0
    path_loss_beta: float = 4.0
    inv_power: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.density) and self.density >= 0.0):
            raise DomainError(f"density must be >= 0, got {self.density!r}")
        if not (math.isfinite(self.link_distance) and self.link_distance > 0.0):
            raise DomainError(f"link distance must be > 0, got {self.link_distance!r}")
        if not (self.path_loss_beta > 2.0):
            raise DomainError(f"beta must exceed 2, got {self.path_loss_beta!r}")
        if not (math.isfinite(self.inv_power) and self.inv_power >= 0.0):
            raise DomainError(f"inv_power must be >= 0, got {self.inv_power!r}")

    @property
    def interference_coefficient(self):
        """``pi * lambda * D^2 * C(beta)``, the coefficient of ``x^(2/beta)`` in the CDF exponent."""
        return math.pi * (self.density * self.link_distance**2) * interference_constant(self.path_loss_beta)

    @property
    def noise_coefficient(self):
        """``D^beta / P``, the coefficient of ``x`` in the CDF exponent."""
        return self.link_distance**self.path_loss_beta * self.inv_power

    @property
    def interference_limited(self):
        return self.inv_power == 0.0


def interference_constant(beta):
    """``(2 pi / beta) / sin(2 pi / beta)``; diverges as beta -> 2."""
    if not beta > 2.0:
        raise DomainError(f"beta must exceed 2 (interference moment diverges), got {beta!r}")
    if math.isinf(beta):
        return 1.0
    arg = 2.0 * math.pi / beta
    return arg / math.sin(arg)


def _exponent(x, params):
    delta = 2.0 / params.path_loss_beta
    return params.interference_coefficient * np.power(x, delta) + params.noise_coefficient * x


def sir_cdf(x, params):
    """``P[SIR < x]``; accepts scalars or arrays, ``x >= 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise DomainError("sir_cdf needs x >= 0")
    with np.errstate(invalid="ignore"):
        out = -np.expm1(-_exponent(arr, params))
    # 0 * inf at x = inf with a zero coefficient
    out = np.where(np.isnan(out), 1.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def sir_pdf(x, params):
    """Density of the SIR at ``x > 0`` (integrable singularity at 0 when noise is absent)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("sir_pdf needs x > 0")
    delta = 2.0 / params.path_loss_beta
    c = params.interference_coefficient
    k = params.noise_coefficient
    out = np.exp(-_exponent(arr, params)) * (k + delta * c * np.power(arr, delta - 1.0))
    if out.ndim == 0:
        return float(out)
    return out


def dispersion(gamma, model=DispersionModel.IID_GAUSSIAN):
    """Channel dispersion in bits^2 per channel use."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0.0) or np.any(np.isnan(g)):
        raise DomainError("dispersion needs gamma >= 0")
    model = DispersionModel(model)
    with np.errstate(invalid="ignore"):
        if model is DispersionModel.IID_GAUSSIAN:
            out = np.where(np.isinf(g), 2.0, 2.0 * g / (1.0 + g)) * LOG2E_SQ
        else:
            out = -np.expm1(-2.0 * np.log1p(g)) * LOG2E_SQ
    if out.ndim == 0:
        return float(out)
    return out
