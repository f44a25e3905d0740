"""Brute-force master-equation evolution for one or two dots.

Ground truth for validating the cluster-expansion hierarchy at desk scale.
The Hilbert space is (photon Fock space, ``fock_cutoff`` levels) x (four
levels per dot: empty, electron, hole, exciton).  The density matrix evolves
under the rotating-frame Hamiltonian (pair detunings, photon-pair exchange,
coherent seed drive) plus dissipators for cavity loss, nonradiative carrier
decay, incoherent pumping, pair recombination into non-lasing modes, and
pure dephasing.

The pure-dephasing coefficient is calibrated so the total interband
coherence decay equals the configured ``gamma``, matching the polarization
equation of the cluster model; the other channels' contributions
(gamma_nr, pump, gamma_nl/2) are subtracted out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridMismatchError,
    InvalidParameterError,
    TruncationError,
)
from .integrator import dp54_adaptive

__all__ = [
    "OracleConfig",
    "OracleGenerator",
    "OracleTrajectory",
    "ComparisonReport",
    "build_generator",
    "evolve",
    "compare",
]

_MAX_DIM = 256

# single-dot levels: 0 empty, 1 electron, 2 hole, 3 exciton
_N_E = np.diag([0.0, 1.0, 0.0, 1.0])
_N_H = np.diag([0.0, 0.0, 1.0, 1.0])
_C_OP = np.zeros((4, 4))   # electron annihilation: |.e> -> |.>
_C_OP[0, 1] = 1.0
_C_OP[2, 3] = 1.0
_B_OP = np.zeros((4, 4))   # hole annihilation
_B_OP[0, 2] = 1.0
_B_OP[1, 3] = 1.0
_P_OP = np.zeros((4, 4))   # pair annihilation c*b: |x> -> |0>
_P_OP[0, 3] = 1.0


@dataclass(frozen=True)
class OracleConfig:
    """Exact-evolution configuration; rates mirror the cluster model.

    ``g`` is supplied directly (not derived from a dipole); ``omega`` are
    per-dot detunings from the frame frequency (rad/s), i.e. nu - omega_dot
    with opposite sign convention folded in below; ``a_inj`` is the seed
    amplitude driving the cavity at rate gamma_c * a_inj.
    """

    n_dots: int = 1
    fock_cutoff: int = 8
    g: float = 1e10
    gamma_c: float = 2e10
    gamma: float = 2e11
    gamma_nr: float = 0.0
    gamma_nl: float = 0.0
    pump: float = 0.0
    detuning: tuple = (0.0,)   # nu - omega_dot per dot (rad/s)
    a_inj: complex = 0.0
    t_end: float = 15e-12
    n_samples: int = 31

    def __post_init__(self):
        if self.n_dots not in (1, 2):
            raise InvalidParameterError("n_dots must be 1 or 2")
        if self.fock_cutoff < 2:
            raise InvalidParameterError("fock_cutoff must be >= 2")
        if len(self.detuning) != self.n_dots:
            raise InvalidParameterError("detuning must have one entry per dot")
        if self.dim > _MAX_DIM:
            raise InvalidParameterError(
                f"Hilbert dimension {self.dim} exceeds the cap {_MAX_DIM}"
            )
        for name in ("g", "gamma_c", "gamma", "gamma_nr", "gamma_nl", "pump"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        gamma_pure = self.gamma - self.gamma_nr - self.pump - 0.5 * self.gamma_nl
        if gamma_pure < 0:
            raise InvalidParameterError(
                "total dephasing gamma must exceed gamma_nr + pump + gamma_nl/2"
            )

    @property
    def dim(self) -> int:
        return self.fock_cutoff * 4 ** self.n_dots


def _kron(*ops: np.ndarray) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


@dataclass
class OracleGenerator:
    """Hamiltonian + collapse operators; ``apply`` is the Liouvillian action."""

    cfg: OracleConfig
    hamiltonian: np.ndarray
    collapse: list
    ops: dict = field(default_factory=dict)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.hamiltonian @ rho - rho @ self.hamiltonian)
        for c_op, cd_c in self.collapse:
            out += c_op @ rho @ c_op.conj().T
            out -= 0.5 * (cd_c @ rho + rho @ cd_c)
        return out


def build_generator(cfg: OracleConfig) -> OracleGenerator:
    """Assemble the rotating-frame generator for the configured system.

    With g = 0 and all dissipators off this reduces to the bare Hamiltonian
    commutator (populations constant); with pump only, dot populations relax
    to pump/(pump + gamma_nr).
    """
    nf = cfg.fock_cutoff
    a_f = np.diag(np.sqrt(np.arange(1, nf)), k=1)
    eye_f = np.eye(nf)
    eye_d = np.eye(4)

    def dot_op(op: np.ndarray, which: int) -> np.ndarray:
        mats = [eye_f]
        for d in range(cfg.n_dots):
            mats.append(op if d == which else eye_d)
        return _kron(*mats)

    a = _kron(a_f, *([eye_d] * cfg.n_dots))
    ops = {"a": a}
    for d in range(cfg.n_dots):
        ops[f"p{d}"] = dot_op(_P_OP, d)
        ops[f"ne{d}"] = dot_op(_N_E, d)
        ops[f"nh{d}"] = dot_op(_N_H, d)
        ops[f"c{d}"] = dot_op(_C_OP, d)
        ops[f"b{d}"] = dot_op(_B_OP, d)

    # rotating frame; pair detuning split evenly between electron and hole
    h = np.zeros((cfg.dim, cfg.dim), dtype=np.complex128)
    for d in range(cfg.n_dots):
        det = -cfg.detuning[d]  # energy above the frame: omega - nu
        h += 0.5 * det * (ops[f"ne{d}"] + ops[f"nh{d}"])
        p = ops[f"p{d}"]
        h += -1j * cfg.g * (p.conj().T @ a - a.conj().T @ p)
    drive = cfg.gamma_c * complex(cfg.a_inj)
    if drive != 0:
        h += 1j * (drive * a.conj().T - np.conj(drive) * a)

    gamma_pure = cfg.gamma - cfg.gamma_nr - cfg.pump - 0.5 * cfg.gamma_nl
    collapse = [np.sqrt(2.0 * cfg.gamma_c) * a]
    for d in range(cfg.n_dots):
        if cfg.gamma_nr > 0:
            collapse.append(np.sqrt(cfg.gamma_nr) * ops[f"c{d}"])
            collapse.append(np.sqrt(cfg.gamma_nr) * ops[f"b{d}"])
        if cfg.pump > 0:
            collapse.append(np.sqrt(cfg.pump) * ops[f"c{d}"].conj().T)
            collapse.append(np.sqrt(cfg.pump) * ops[f"b{d}"].conj().T)
        if cfg.gamma_nl > 0:
            collapse.append(np.sqrt(cfg.gamma_nl) * ops[f"p{d}"])
        if gamma_pure > 0:
            collapse.append(
                np.sqrt(gamma_pure / 2.0) * (ops[f"ne{d}"] + ops[f"nh{d}"])
            )
    pairs = [(c, c.conj().T @ c) for c in collapse]
    return OracleGenerator(cfg, h, pairs, ops)


@dataclass
class OracleTrajectory:
    """Exact moment time series; keys mirror the cluster state blocks."""

    times: np.ndarray
    moments: dict

    def __getitem__(self, key: str) -> np.ndarray:
        return self.moments[key]


def vacuum_rho(cfg: OracleConfig) -> np.ndarray:
    rho = np.zeros((cfg.dim, cfg.dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def coherent_rho(cfg: OracleConfig, alpha: complex) -> np.ndarray:
    """|alpha> x ground-state dots, truncated and renormalized."""
    nf = cfg.fock_cutoff
    amps = np.array(
        [alpha ** n / math.sqrt(math.factorial(n)) for n in range(nf)],
        dtype=np.complex128,
    )
    amps *= math.exp(-0.5 * abs(alpha) ** 2)
    amps /= np.linalg.norm(amps)
    vec = amps
    for _ in range(cfg.n_dots):
        ground = np.zeros(4)
        ground[0] = 1.0
        vec = np.kron(vec, ground)
    return np.outer(vec, vec.conj())


def _expect(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(op @ rho))


def _collect_moments(gen: OracleGenerator, rho: np.ndarray) -> dict:
    """All cluster-tracked moments, with the same subtraction conventions."""
    cfg = gen.cfg
    ops = gen.ops
    a = ops["a"]
    n = cfg.n_dots
    out = {}
    a_mean = _expect(a, rho)
    out["a"] = a_mean
    out["dada"] = (_expect(a.conj().T @ a, rho) - np.conj(a_mean) * a_mean).real
    out["daa"] = _expect(a @ a, rho) - a_mean * a_mean
    out["a4"] = _expect(a.conj().T @ a.conj().T @ a @ a, rho).real

    pol = np.empty(n, dtype=np.complex128)
    fe = np.empty(n)
    fh = np.empty(n)
    d_pba = np.empty(n, dtype=np.complex128)
    d_fea = np.empty(n, dtype=np.complex128)
    d_fha = np.empty(n, dtype=np.complex128)
    d_adpb = np.empty(n, dtype=np.complex128)
    for d in range(n):
        p = ops[f"p{d}"]
        ne = ops[f"ne{d}"]
        nh = ops[f"nh{d}"]
        pol[d] = _expect(p, rho)
        fe[d] = _expect(ne, rho).real
        fh[d] = _expect(nh, rho).real
        d_pba[d] = _expect(p @ a, rho) - pol[d] * a_mean
        d_fea[d] = _expect(ne @ a, rho) - fe[d] * a_mean
        d_fha[d] = _expect(nh @ a, rho) - fh[d] * a_mean
        d_adpb[d] = _expect(a.conj().T @ p, rho) - np.conj(a_mean) * pol[d]
    out.update(pol=pol, fe=fe, fh=fh, d_pba=d_pba, d_fea=d_fea,
               d_fha=d_fha, d_adpb=d_adpb)

    d_pp = np.zeros((n, n), dtype=np.complex128)
    d_pdp = np.zeros((n, n), dtype=np.complex128)
    d_epol = np.zeros((n, n), dtype=np.complex128)
    d_hpol = np.zeros((n, n), dtype=np.complex128)
    d_eh = np.zeros((n, n))
    d_ee = np.zeros((n, n))
    d_hh = np.zeros((n, n))
    for al in range(n):
        p_a = ops[f"p{al}"]
        ne_a = ops[f"ne{al}"]
        nh_a = ops[f"nh{al}"]
        d_pdp[al, al] = (_expect(ne_a @ nh_a, rho) - fe[al] * fh[al]).real
        for be in range(n):
            p_b = ops[f"p{be}"]
            if be != al:
                d_pp[al, be] = _expect(p_a @ p_b, rho) - pol[al] * pol[be]
                d_pdp[al, be] = (
                    _expect(p_b.conj().T @ p_a, rho) - np.conj(pol[be]) * pol[al]
                )
                d_epol[al, be] = _expect(ne_a @ p_b, rho) - fe[al] * pol[be]
                d_hpol[al, be] = _expect(nh_a @ p_b, rho) - fh[al] * pol[be]
                d_eh[al, be] = (
                    _expect(ne_a @ ops[f"nh{be}"], rho) - fe[al] * fh[be]
                ).real
                d_ee[al, be] = (
                    _expect(ne_a @ ops[f"ne{be}"], rho) - fe[al] * fe[be]
                ).real
                d_hh[al, be] = (
                    _expect(nh_a @ ops[f"nh{be}"], rho) - fh[al] * fh[be]
                ).real
    out.update(d_pp=d_pp, d_pdp=d_pdp, d_epol=d_epol, d_hpol=d_hpol,
               d_eh=d_eh, d_ee=d_ee, d_hh=d_hh)
    out["d_exc"] = np.ascontiguousarray(np.diagonal(d_pdp).real)
    return out


def evolve(rho0: np.ndarray | None, cfg: OracleConfig,
           rtol: float = 1e-9, atol: float = 1e-12) -> OracleTrajectory:
    """Exact evolution sampling every cluster-tracked moment.

    Trace is monitored at 1e-9 and positivity at 1e-6; a positivity loss
    raises TruncationError (increase ``fock_cutoff``).
    """
    gen = build_generator(cfg)
    rho = vacuum_rho(cfg) if rho0 is None else np.asarray(rho0, dtype=np.complex128)
    if rho.shape != (cfg.dim, cfg.dim):
        raise InvalidParameterError("rho0 has the wrong dimension")

    dim = cfg.dim

    def f(t, y):
        return gen.apply(y.reshape(dim, dim)).ravel()

    times = np.linspace(0.0, cfg.t_end, cfg.n_samples)
    moments = []
    y = rho.ravel().copy()
    for i, t in enumerate(times):
        if i > 0:
            y = dp54_adaptive(f, y, float(times[i - 1]), float(t), rtol, atol)
        r = y.reshape(dim, dim)
        tr = float(np.trace(r).real)
        if abs(tr - 1.0) > 1e-9 * max(1.0, cfg.t_end * cfg.gamma_c):
            raise TruncationError(f"trace drifted to {tr!r} at t={t:.2e}")
        eigs = np.linalg.eigvalsh(0.5 * (r + r.conj().T))
        if eigs.min() < -1e-6:
            raise TruncationError(
                f"density matrix lost positivity ({eigs.min():.2e}); "
                "increase fock_cutoff"
            )
        moments.append(_collect_moments(gen, r))

    stacked = {
        key: np.array([mom[key] for mom in moments])
        for key in moments[0]
    }
    return OracleTrajectory(times, stacked)


@dataclass
class ComparisonReport:
    """Per-field maximum relative deviation between two moment sets."""

    fields: dict          # name -> max relative deviation
    tol_rel: float
    passed: bool

    def __str__(self) -> str:
        lines = [f"{'field':10s} {'max rel dev':>12s}  status"]
        for name, dev in self.fields.items():
            status = "pass" if dev <= self.tol_rel else "FAIL"
            lines.append(f"{name:10s} {dev:12.4e}  {status}")
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'} "
                     f"(tol {self.tol_rel:g})")
        return "\n".join(lines)


def compare(cluster: dict, exact: dict, times_a: np.ndarray,
            times_b: np.ndarray, tol_rel: float,
            floor: float = 1e-12) -> ComparisonReport:
    """Compare two moment dictionaries on a shared time grid.

    Deviations are measured relative to the running maximum magnitude of the
    exact trajectory; samples where the exact magnitude is below ``floor``
    are skipped.  Fields present in only one dict are ignored.
    """
    if times_a.shape != times_b.shape or not np.allclose(
            times_a, times_b, rtol=1e-12, atol=0.0):
        raise GridMismatchError("sample grids differ")
    fields = {}
    for name in sorted(set(cluster) & set(exact)):
        c = np.asarray(cluster[name])
        e = np.asarray(exact[name])
        if c.shape != e.shape:
            raise GridMismatchError(f"field {name} shapes differ")
        mag = np.abs(e)
        ref = max(float(mag.max()), floor)
        mask = mag > max(floor, 1e-3 * ref)
        if not mask.any():
            fields[name] = 0.0
            continue
        dev = np.abs(c - e)[mask] / mag[mask]
        fields[name] = float(dev.max())
    passed = all(dev <= tol_rel for dev in fields.values())
    return ComparisonReport(fields, tol_rel, passed)
