"""Physical constants used throughout, taken from CODATA via scipy."""

from scipy.constants import c as C_LIGHT          # speed of light (m/s)
from scipy.constants import e as E_CHARGE         # elementary charge (C)
from scipy.constants import epsilon_0 as EPS0     # vacuum permittivity (F/m)
from scipy.constants import hbar as HBAR          # reduced Planck constant (J s)

EV = E_CHARGE  # 1 eV in joules

__all__ = ["C_LIGHT", "E_CHARGE", "EPS0", "HBAR", "EV"]
