"""Physical outputs of a state: quadrature variances, photon statistics,
second-order coherence, output power, squeeze factor.

The field is characterized by its first moment ``a = <A>`` and the two
second-order correlations ``dada = d<A+A>`` and ``daa = d<AA>``.  Fourth
moments (photon-number variance, g2) use the Gaussian moment factorization,
which is the closure consistent with the doublet truncation and reproduces
the coherent and thermal limits exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import InvalidParameterError, UndefinedObservableError
from .params import ModelParams
from .state import SystemState

__all__ = [
    "Observables",
    "quadrature_variances",
    "photon_stats",
    "g2_zero",
    "output_power",
    "squeeze_factor",
    "injection_amplitude",
    "compute_observables",
]


@dataclass(frozen=True)
class Observables:
    """All scalar outputs at one operating point."""

    var_x: float
    var_y: float
    n_mean: float
    dn2: float
    dn_rel: float            # NaN sentinel when n_mean = 0
    g2: float                # NaN sentinel when n_mean = 0
    p_out_photons: float     # photons/s
    p_out_w: float           # W
    squeeze_db: float        # NaN sentinel when n_mean = 0
    uncertainty_product: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _moments(state: SystemState) -> tuple[complex, float, complex]:
    return state.a_mean, state.dada, state.daa


def quadrature_variances(state: SystemState) -> tuple[float, float]:
    """(Delta X)^2 and (Delta Y)^2 of the intracavity field.

    var_x = (1 + 2*dada + 2*Re daa)/4, var_y with the minus sign; both equal
    1/4 for a coherent state.
    """
    _, dada, daa = _moments(state)
    var_x = 0.25 * (1.0 + 2.0 * dada + 2.0 * daa.real)
    var_y = 0.25 * (1.0 + 2.0 * dada - 2.0 * daa.real)
    return var_x, var_y


def photon_stats(state: SystemState) -> tuple[float, float, float]:
    """Mean photon number, number variance, and relative number noise.

    ``n_mean = |a|^2 + dada``.  The variance uses the Gaussian (displaced
    squeezed-thermal) factorization::

        dn2 = n + dada^2 + |daa|^2 + 2|a|^2 dada + 2 Re(conj(a)^2 daa)

    which gives dn2 = n for a coherent state and n(1+n) for thermal light.
    ``dn_rel = sqrt(dn2/n)`` is NaN when the field is empty.
    """
    a, dada, daa = _moments(state)
    n_coh = (a.conjugate() * a).real
    n_mean = n_coh + dada
    dn2 = (
        n_mean
        + dada * dada
        + (daa.conjugate() * daa).real
        + 2.0 * n_coh * dada
        + 2.0 * (a.conjugate() ** 2 * daa).real
    )
    dn_rel = math.sqrt(dn2 / n_mean) if n_mean > 0.0 else math.nan
    return n_mean, dn2, dn_rel


def g2_zero(state: SystemState) -> float:
    """Zero-delay intensity correlation g2(0) via Gaussian factorization.

    2 for thermal light, 1 for coherent light.  Raises for an empty field.
    """
    a, dada, daa = _moments(state)
    n_coh = (a.conjugate() * a).real
    n_mean = n_coh + dada
    if n_mean <= 0.0:
        raise UndefinedObservableError("g2(0) undefined for zero mean photon number")
    numer = (
        n_coh * n_coh
        + 4.0 * n_coh * dada
        + 2.0 * (a.conjugate() ** 2 * daa).real
        + 2.0 * dada * dada
        + (daa.conjugate() * daa).real
    )
    return numer / (n_mean * n_mean)


def output_power(state: SystemState, params: ModelParams) -> tuple[float, float]:
    """Photon output rate 2*gamma_c*<a+a> and the corresponding power (W)."""
    n_mean, _, _ = photon_stats(state)
    rate = 2.0 * params.gamma_c * n_mean
    return rate, rate * params.photon_energy


def squeeze_factor(state: SystemState) -> float:
    """Number-noise squeeze factor -10*log10(dn2/n) in dB; NaN for empty field.

    Positive values mean sub-Poissonian photon statistics.
    """
    n_mean, dn2, _ = photon_stats(state)
    if n_mean <= 0.0:
        return math.nan
    return -10.0 * math.log10(dn2 / n_mean)


def injection_amplitude(params: ModelParams) -> complex:
    """Seed amplitude A_inj from the configured injection strength.

    The injected photon rate L and the intracavity seed amplitude are related
    through the photon escape time T_out = 1/(2*gamma_c): L = |A_inj|^2/T_out,
    i.e. |A_inj| = sqrt(L/(2*gamma_c)), a dimensionless amplitude whose
    outflow matches the injected flux.  Power input converts via the photon
    energy first.  Phase is 0 by convention, which places the squeezed
    quadrature on X.
    """
    if params.inj_rate is not None and params.inj_power is not None:
        raise InvalidParameterError("inj_rate and inj_power are mutually exclusive")
    rate = params.inj_photon_rate
    if rate == 0.0:
        return 0.0 + 0.0j
    t_out = 1.0 / (2.0 * params.gamma_c)
    return complex(math.sqrt(rate * t_out), 0.0)


def compute_observables(state: SystemState, params: ModelParams) -> Observables:
    """Bundle every observable for one state.

    ``g2`` and ``squeeze_db`` are NaN sentinels when the field is empty so
    sweep tables stay rectangular.
    """
    var_x, var_y = quadrature_variances(state)
    n_mean, dn2, dn_rel = photon_stats(state)
    p_photons, p_w = output_power(state, params)
    g2 = g2_zero(state) if n_mean > 0.0 else math.nan
    return Observables(
        var_x=var_x,
        var_y=var_y,
        n_mean=n_mean,
        dn2=dn2,
        dn_rel=dn_rel,
        g2=g2,
        p_out_photons=p_photons,
        p_out_w=p_w,
        squeeze_db=squeeze_factor(state),
        uncertainty_product=var_x * var_y,
    )
