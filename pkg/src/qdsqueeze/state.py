"""Dynamical state of the coupled field/carrier correlation hierarchy.

The state is stored as one flat complex vector so the adaptive integrator can
treat it uniformly; :class:`StateLayout` maps named blocks to slices.  Real
blocks (populations, photon-number correlation, population-population
correlations) are stored complex with identically-zero imaginary parts, which
the equations of motion preserve exactly.

Blocks, for ``M`` frequency bins (pair operator ``p = CB`` per bin):

==========  =====  =======================================================
name        shape  meaning
==========  =====  =======================================================
a           1      field singlet <A>
daa         1      field anomalous correlation d<AA>
dada        1      photon-number correlation d<A+A> (real)
pol         M      interband polarization <C B>
fe, fh      M      electron / hole populations (real)
d_pba       M      photon-assisted polarization d<C B A>
d_fea       M      electron-population-field correlation d<C+C A>
d_fha       M      hole-population-field correlation d<B+B A>
d_adpb      M      conjugate-field polarization correlation d<A+ C B>
d_pp        M,M    pair-pair correlation d<p_a p_b> (symmetric)
d_pdp       M,M    pair-coherence d<p_b+ p_a> (Hermitian; real diagonal is
                   the on-site exciton correlation d<n_e n_h>)
d_epol      M,M    d<n_e(a) p(b)> (zero diagonal)
d_hpol      M,M    d<n_h(a) p(b)> (zero diagonal)
d_eh        M,M    d<n_e(a) n_h(b)> (real, zero diagonal; the diagonal lives
                   in d_pdp)
d_ee        M,M    d<n_e(a) n_e(b)> (real symmetric, zero diagonal)
d_hh        M,M    d<n_h(a) n_h(b)> (real symmetric, zero diagonal)
==========  =====  =======================================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SymmetryDriftError

__all__ = ["StateLayout", "SystemState", "vacuum_state", "enforce_symmetries"]

_VECTOR_BLOCKS = ("pol", "fe", "fh", "d_pba", "d_fea", "d_fha", "d_adpb")
_MATRIX_BLOCKS = ("d_pp", "d_pdp", "d_epol", "d_hpol", "d_eh", "d_ee", "d_hh")
_SCALAR_BLOCKS = ("a", "daa", "dada")

# phase weight: number of e^{-i nu t} factors carried by each block in the
# lab frame; used to make the RHS autonomous in the seed frame.
PHASE_WEIGHT = {
    "a": 1, "daa": 2, "dada": 0,
    "pol": 1, "fe": 0, "fh": 0,
    "d_pba": 2, "d_fea": 1, "d_fha": 1, "d_adpb": 0,
    "d_pp": 2, "d_pdp": 0, "d_epol": 1, "d_hpol": 1,
    "d_eh": 0, "d_ee": 0, "d_hh": 0,
}


@dataclass(frozen=True)
class StateLayout:
    """Offsets of the named blocks inside the flat complex vector."""

    n_bins: int

    @property
    def size(self) -> int:
        m = self.n_bins
        return 3 + 7 * m + 7 * m * m

    def offset(self, name: str) -> int:
        m = self.n_bins
        if name in _SCALAR_BLOCKS:
            return _SCALAR_BLOCKS.index(name)
        if name in _VECTOR_BLOCKS:
            return 3 + _VECTOR_BLOCKS.index(name) * m
        if name in _MATRIX_BLOCKS:
            return 3 + 7 * m + _MATRIX_BLOCKS.index(name) * m * m
        raise KeyError(name)

    def block(self, y: np.ndarray, name: str) -> np.ndarray:
        """View of block ``name`` in flat vector ``y`` (matrices reshaped)."""
        m = self.n_bins
        off = self.offset(name)
        if name in _SCALAR_BLOCKS:
            return y[off:off + 1]
        if name in _VECTOR_BLOCKS:
            return y[off:off + m]
        return y[off:off + m * m].reshape(m, m)

    def block_of_index(self, idx: int) -> str:
        """Name of the block containing flat index ``idx`` (for diagnostics)."""
        m = self.n_bins
        if idx < 3:
            return _SCALAR_BLOCKS[idx]
        idx -= 3
        if idx < 7 * m:
            return _VECTOR_BLOCKS[idx // m]
        idx -= 7 * m
        return _MATRIX_BLOCKS[idx // (m * m)]


class SystemState:
    """Named view over the flat state vector.

    Construct with :func:`vacuum_state` or from an existing flat vector.
    Blocks are exposed as properties returning live views; scalar blocks
    (``a_mean``, ``daa``, ``dada``) return Python scalars.
    """

    __slots__ = ("layout", "y")

    def __init__(self, layout: StateLayout, y: np.ndarray | None = None):
        self.layout = layout
        if y is None:
            y = np.zeros(layout.size, dtype=np.complex128)
        y = np.asarray(y, dtype=np.complex128)
        if y.shape != (layout.size,):
            raise InvalidParameterError(
                f"state vector has size {y.shape}, expected ({layout.size},)"
            )
        self.y = y

    @property
    def n_bins(self) -> int:
        return self.layout.n_bins

    def copy(self) -> "SystemState":
        return SystemState(self.layout, self.y.copy())

    # -- scalar blocks ------------------------------------------------------
    @property
    def a_mean(self) -> complex:
        return complex(self.y[0])

    @a_mean.setter
    def a_mean(self, value: complex):
        self.y[0] = value

    @property
    def daa(self) -> complex:
        return complex(self.y[1])

    @daa.setter
    def daa(self, value: complex):
        self.y[1] = value

    @property
    def dada(self) -> float:
        return float(self.y[2].real)

    @dada.setter
    def dada(self, value: float):
        self.y[2] = value

    # -- vector/matrix blocks (live complex views) --------------------------
    def _view(self, name: str) -> np.ndarray:
        return self.layout.block(self.y, name)

    @property
    def pol(self) -> np.ndarray:
        return self._view("pol")

    @property
    def fe(self) -> np.ndarray:
        return self._view("fe")

    @property
    def fh(self) -> np.ndarray:
        return self._view("fh")

    @property
    def d_pba(self) -> np.ndarray:
        return self._view("d_pba")

    @property
    def d_fea(self) -> np.ndarray:
        return self._view("d_fea")

    @property
    def d_fha(self) -> np.ndarray:
        return self._view("d_fha")

    @property
    def d_adpb(self) -> np.ndarray:
        return self._view("d_adpb")

    @property
    def d_pp(self) -> np.ndarray:
        return self._view("d_pp")

    @property
    def d_pdp(self) -> np.ndarray:
        return self._view("d_pdp")

    @property
    def d_epol(self) -> np.ndarray:
        return self._view("d_epol")

    @property
    def d_hpol(self) -> np.ndarray:
        return self._view("d_hpol")

    @property
    def d_eh(self) -> np.ndarray:
        return self._view("d_eh")

    @property
    def d_ee(self) -> np.ndarray:
        return self._view("d_ee")

    @property
    def d_hh(self) -> np.ndarray:
        return self._view("d_hh")

    @property
    def d_exc(self) -> np.ndarray:
        """On-site exciton correlation: real diagonal of d_pdp."""
        return np.ascontiguousarray(np.diagonal(self._view("d_pdp")).real)

    def coherence_norm(self) -> float:
        """Largest magnitude in the phase-carrying sector (zero when free-running)."""
        parts = [abs(self.a_mean), abs(self.daa)]
        for name in ("pol", "d_pba", "d_fea", "d_fha", "d_pp", "d_epol", "d_hpol"):
            block = self._view(name)
            parts.append(float(np.abs(block).max()) if block.size else 0.0)
        return max(parts)


def vacuum_state(n_bins: int) -> SystemState:
    """Cold start: every moment zero."""
    return SystemState(StateLayout(n_bins))


def symmetry_residual(state: SystemState) -> float:
    """Largest deviation from the structural symmetries, in absolute units."""
    d_pp = state.d_pp
    d_pdp = state.d_pdp
    res = 0.0
    if state.n_bins > 1:
        res = max(res, float(np.abs(d_pp - d_pp.T).max()))
        res = max(res, float(np.abs(d_pdp - d_pdp.conj().T).max()))
        for name in ("d_ee", "d_hh"):
            mat = state._view(name)
            res = max(res, float(np.abs(mat - mat.T).max()))
        for name in ("d_epol", "d_hpol", "d_eh", "d_ee", "d_hh"):
            mat = state._view(name)
            res = max(res, float(np.abs(np.diagonal(mat)).max()))
    res = max(res, float(np.abs(np.diagonal(d_pdp).imag).max()))
    for name in ("fe", "fh"):
        res = max(res, float(np.abs(state._view(name).imag).max()))
    res = max(res, abs(state.y[2].imag))
    return res


def enforce_symmetries(state: SystemState, tol: float = 1e-6,
                       pop_eps: float = 1e-9) -> SystemState:
    """Project the state back onto its structural symmetries.

    Symmetrizes d_pp, Hermitizes d_pdp, symmetrizes d_ee/d_hh and zeroes the
    diagonals that are not evolved, and drops stray imaginary parts of the
    real blocks.  Populations are clamped to [0, 1] only within ``pop_eps``.

    Raises
    ------
    SymmetryDriftError
        If any symmetry deviation exceeds ``tol`` (scaled by the state's
        magnitude) or a population leaves [0 - pop_eps, 1 + pop_eps].
    """
    scale = max(1.0, float(np.abs(state.y).max()))
    res = symmetry_residual(state)
    if res > tol * scale:
        raise SymmetryDriftError(
            f"symmetry residual {res:.3e} exceeds tolerance {tol * scale:.3e}"
        )
    out = state.copy()
    for name in ("fe", "fh"):
        block = out._view(name)
        vals = block.real
        if np.any(vals < -pop_eps) or np.any(vals > 1.0 + pop_eps):
            worst = vals.min() if abs(vals.min()) > abs(vals.max() - 1.0) else vals.max()
            raise SymmetryDriftError(
                f"population {name} left [0,1] beyond eps={pop_eps:g}: {worst!r}"
            )
        block[:] = np.clip(vals, 0.0, 1.0)
    out.y[2] = out.y[2].real

    if out.n_bins > 1:
        d_pp = out.d_pp
        d_pp[:] = 0.5 * (d_pp + d_pp.T)
        d_pdp = out.d_pdp
        d_pdp[:] = 0.5 * (d_pdp + d_pdp.conj().T)
        for name in ("d_ee", "d_hh"):
            mat = out._view(name)
            mat[:] = 0.5 * (mat + mat.T).real
            np.fill_diagonal(mat, 0.0)
        for name in ("d_epol", "d_hpol"):
            np.fill_diagonal(out._view(name), 0.0)
        d_eh = out.d_eh
        d_eh[:] = d_eh.real
        np.fill_diagonal(d_eh, 0.0)
    else:
        out.d_pdp[:] = out.d_pdp.real
    return out
