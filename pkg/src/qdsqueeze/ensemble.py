"""Discretized inhomogeneously broadened transition-frequency ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .errors import InvalidParameterError
from .params import EnsembleSpec, ModelParams

__all__ = ["Ensemble", "build_ensemble", "FWHM_TO_SIGMA"]

# Gaussian FWHM = 2*sqrt(2*ln 2) * sigma
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class Ensemble:
    """Per-bin transition frequencies and degeneracy weights.

    ``omega`` is strictly increasing (rad/s); ``weight`` is the number of
    dots represented by each bin, normalized so the weights sum to the dot
    density times the mode cross-sectional area.
    """

    omega: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "weight", weight)
        if omega.ndim != 1 or weight.shape != omega.shape:
            raise InvalidParameterError("omega and weight must be matching 1-d arrays")
        if omega.size == 0:
            raise InvalidParameterError("ensemble must contain at least one bin")
        if np.any(weight < 0):
            raise InvalidParameterError("weights must be >= 0")
        if omega.size > 1 and not np.all(np.diff(omega) > 0):
            raise InvalidParameterError("omega must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return int(self.omega.size)

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    def detunings(self, nu: float) -> np.ndarray:
        """Frame detunings nu - omega_alpha (rad/s)."""
        return nu - self.omega


def build_ensemble(spec: EnsembleSpec, params: ModelParams) -> Ensemble:
    """Discretize a Gaussian inhomogeneous distribution onto equal-spaced bins.

    The grid spans ``center +- span_sigmas*sigma`` with ``n_bins`` equally
    spaced frequencies; bin weights sample the Gaussian density and are
    normalized to ``qd_density * mode_area``.  A single bin degenerates to
    the center frequency carrying the full weight.
    """
    center_energy = spec.center_energy
    if center_energy is None:
        center_energy = params.photon_energy
    omega0 = center_energy / HBAR
    total = spec.qd_density * params.mode_area

    if spec.n_bins == 1 or spec.inhomogeneous_fwhm == 0.0:
        if spec.n_bins > 1:
            raise InvalidParameterError(
                "inhomogeneous_fwhm = 0 requires n_bins = 1 (degenerate ensemble)"
            )
        return Ensemble(np.array([omega0]), np.array([total]))

    sigma = spec.inhomogeneous_fwhm * FWHM_TO_SIGMA / HBAR  # rad/s
    half_span = spec.span_sigmas * sigma
    omega = omega0 + np.linspace(-half_span, half_span, spec.n_bins)
    x = (omega - omega0) / sigma
    density = np.exp(-0.5 * x * x)
    weight = density * (total / density.sum())
    return Ensemble(omega, weight)
