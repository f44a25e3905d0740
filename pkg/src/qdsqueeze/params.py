"""Parameter containers: physical model, ensemble discretization, integration.

All quantities are SI internally.  ``ModelParams`` is the single home of the
symbols entering the coupling constant and the equations of motion; defaults
follow the reference InAs-dot / GaAs-microcavity operating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .constants import C_LIGHT, E_CHARGE, EV, HBAR
from .errors import InvalidParameterError

__all__ = ["ModelParams", "EnsembleSpec", "IntegrationConfig"]


@dataclass(frozen=True)
class ModelParams:
    """Physical rates, geometry and injection settings.

    Parameters
    ----------
    wavelength : float
        Emission wavelength (m).
    cavity_diameter, cavity_length : float
        Cylindrical mode volume geometry (m).
    gamma_c : float
        Cavity half-linewidth (1/s); the full cavity linewidth is 2*gamma_c.
    gamma : float
        Interband (polarization) dephasing rate (1/s).
    gamma_nr : float
        Nonradiative carrier decay rate (1/s).
    gamma_nl : float
        Spontaneous emission rate into non-lasing modes (1/s).
    pump : float
        Incoherent pump rate (1/s); enters with Pauli-blocking factors.
    dipole : float
        Dipole matrix element (C m).
    background_index : float
        Background refractive index; the background permittivity is
        ``background_index**2 * eps0``.
    inj_rate : float or None
        Injected photon rate (photons/s).  Mutually exclusive with
        ``inj_power``.
    inj_power : float or None
        Injected optical power (W), converted via the photon energy.
    detuning_inj : float
        Seed detuning (rad/s), cavity frame minus seed frame.
    """

    wavelength: float = 0.92e-6
    cavity_diameter: float = 0.2e-6
    cavity_length: float = 1.5e-6
    gamma_c: float = 2e10
    gamma: float = 2e11
    gamma_nr: float = 2e10
    gamma_nl: float = 3e12
    pump: float = 0.0
    dipole: float = E_CHARGE * 0.5e-9
    background_index: float = 3.5
    inj_rate: float | None = None
    inj_power: float | None = None
    detuning_inj: float = 0.0

    def __post_init__(self):
        rates = {
            "gamma_c": self.gamma_c,
            "gamma": self.gamma,
            "gamma_nr": self.gamma_nr,
            "gamma_nl": self.gamma_nl,
            "pump": self.pump,
        }
        for name, value in rates.items():
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be >= 0, got {value!r}")
        if self.wavelength <= 0:
            raise InvalidParameterError("wavelength must be > 0")
        if self.cavity_diameter <= 0 or self.cavity_length <= 0:
            raise InvalidParameterError("cavity geometry must be > 0")
        if self.dipole < 0:
            raise InvalidParameterError("dipole must be >= 0")
        if self.background_index < 1:
            raise InvalidParameterError("background_index must be >= 1")
        if self.inj_rate is not None and self.inj_power is not None:
            raise InvalidParameterError(
                "inj_rate and inj_power are mutually exclusive; set at most one"
            )
        for name in ("inj_rate", "inj_power"):
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0):
                raise InvalidParameterError(f"{name} must be >= 0, got {value!r}")
        if not math.isfinite(self.detuning_inj):
            raise InvalidParameterError("detuning_inj must be finite")

    @property
    def nu(self) -> float:
        """Cavity-mode angular frequency 2*pi*c/lambda (rad/s)."""
        return 2.0 * math.pi * C_LIGHT / self.wavelength

    @property
    def photon_energy(self) -> float:
        """hbar*nu (J)."""
        return HBAR * self.nu

    @property
    def mode_volume(self) -> float:
        """Cylinder volume pi*(d/2)^2*L (m^3)."""
        return math.pi * (self.cavity_diameter / 2.0) ** 2 * self.cavity_length

    @property
    def mode_area(self) -> float:
        """Mode cross-sectional area pi*(d/2)^2 (m^2)."""
        return math.pi * (self.cavity_diameter / 2.0) ** 2

    @property
    def is_injected(self) -> bool:
        return (self.inj_rate or 0.0) > 0 or (self.inj_power or 0.0) > 0

    @property
    def inj_photon_rate(self) -> float:
        """Injected photon rate (photons/s); 0 when free-running."""
        if self.inj_rate is not None:
            return self.inj_rate
        if self.inj_power is not None:
            return self.inj_power / self.photon_energy
        return 0.0

    def with_(self, **changes) -> "ModelParams":
        """Return a copy with the given fields replaced."""
        return replace(self, **changes)


@dataclass(frozen=True)
class EnsembleSpec:
    """Discretization of the inhomogeneously broadened transition ensemble.

    ``center_energy`` defaults to the photon energy at ``ModelParams.wavelength``
    (resonant ensemble center) when left as None.
    """

    n_bins: int = 25
    inhomogeneous_fwhm: float = 10e-3 * EV  # J (10 meV)
    center_energy: float | None = None      # J; None -> resonant with the mode
    span_sigmas: float = 3.0
    qd_density: float = 2e14                # 1/m^2

    def __post_init__(self):
        if self.n_bins < 1:
            raise InvalidParameterError("n_bins must be >= 1")
        if self.inhomogeneous_fwhm < 0:
            raise InvalidParameterError("inhomogeneous_fwhm must be >= 0")
        if self.span_sigmas <= 0:
            raise InvalidParameterError("span_sigmas must be > 0")
        if self.qd_density < 0:
            raise InvalidParameterError("qd_density must be >= 0")

    def with_(self, **changes) -> "EnsembleSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class IntegrationConfig:
    """Adaptive integrator and steady-state detection settings.

    ``steady_tol`` is the relative state change per cavity lifetime below
    which the state is declared stationary.  ``symmetry_interval`` is the
    number of accepted steps between symmetry-enforcement passes.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dt_init: float | None = None
    dt_max: float | None = None
    t_max: float = 50e-9
    steady_tol: float = 1e-9
    symmetry_interval: int = 100
    method: str = "etd"  # "etd": exponential stepper; "rk": plain embedded pair

    def __post_init__(self):
        if self.method not in ("etd", "rk"):
            raise InvalidParameterError("method must be 'etd' or 'rk'")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise InvalidParameterError("tolerances must be > 0")
        if self.t_max <= 0:
            raise InvalidParameterError("t_max must be > 0")
        if self.steady_tol <= 0:
            raise InvalidParameterError("steady_tol must be > 0")
        if self.symmetry_interval < 1:
            raise InvalidParameterError("symmetry_interval must be >= 1")
        for name in ("dt_init", "dt_max"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise InvalidParameterError(f"{name} must be > 0 when set")

    def with_(self, **changes) -> "IntegrationConfig":
        return replace(self, **changes)
