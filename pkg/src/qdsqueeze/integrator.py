"""Adaptive time integration and steady-state detection.

Two interchangeable steppers advance the flat complex state vector:

* ``method="etd"`` (default): a four-stage exponential Runge-Kutta scheme
  that propagates the exact diagonal linear part (all decays and bin
  detunings, up to ~1e13 rad/s) analytically and integrates the remaining
  coupling terms explicitly.  Local error is controlled by step doubling
  with local extrapolation, and the step size moves on a power-of-two
  ladder so the cached exponential/weight vectors are reused between
  changes.  The scheme is exact for a constant source, so the step grows
  freely as a fixed point is approached.

* ``method="rk"``: a Dormand-Prince 5(4) embedded pair with PI step
  control.  Stability-limited by the fastest detuning, so practical only
  for short transients and cross-checks.

:func:`dp54_adaptive` exposes the same embedded pair in generic form for
small dense systems (used by the master-equation oracle).

Symmetry enforcement runs every ``symmetry_interval`` accepted steps and
must be a no-op at integrator accuracy, else the run fails loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    FRAME_CAVITY,
    RhsContext,
    _rhs_kernel,
    build_linear_diagonal,
    njit,
    rhs_flat,
)
from .ensemble import Ensemble
from .errors import (
    InvalidParameterError,
    NumericalBlowupError,
    StiffnessError,
    SymmetryDriftError,
)
from .params import IntegrationConfig, ModelParams
from .state import SystemState, enforce_symmetries

__all__ = [
    "Trajectory",
    "SteadyDiagnostics",
    "step",
    "integrate_transient",
    "evolve_to_steady",
    "steady_residual",
    "dp54_adaptive",
]

# Dormand-Prince 5(4) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = (3 / 40, 9 / 40)
_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_B = _A[6].copy()  # 5th-order weights
_E = _B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_H_FLOOR = 1e-22  # below this the problem is declared too stiff

_OK, _MAXSTEPS, _UNDERFLOW = 0, 1, 2


@dataclass
class Trajectory:
    """Uniformly sampled trajectory; ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: list

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise InvalidParameterError("times and states must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise InvalidParameterError("sample times must be strictly increasing")

    def field(self, name: str) -> np.ndarray:
        """Stacked block time series, shape (n_times, *block_shape)."""
        return np.array([s.layout.block(s.y, name).copy() for s in self.states])

    def scalar(self, name: str) -> np.ndarray:
        idx = {"a": 0, "daa": 1, "dada": 2}[name]
        return np.array([s.y[idx] for s in self.states])


@dataclass
class SteadyDiagnostics:
    t_reached: float
    residual_norm: float
    converged: bool
    n_steps: int
    dt_final: float


# --------------------------------------------------------------------------
# exponential stepper machinery
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _phi1(w):  # pragma: no cover - numba
    if abs(w) < 0.03:
        return 1.0 + w * (0.5 + w * (1 / 6 + w * (1 / 24 + w * (1 / 120 + w / 720))))
    return (np.exp(w) - 1.0) / w


@njit(cache=True, nogil=True)
def _fill_phi(lam, h, out):  # pragma: no cover - numba
    """Rows: E=e^z, E2=e^{z/2}, Q=(h/2)phi1(z/2), h*fa, h*fb, h*fg for z=lam*h."""
    n = lam.size
    for i in range(n):
        z = lam[i] * h
        out[0, i] = np.exp(z)
        out[1, i] = np.exp(0.5 * z)
        out[2, i] = 0.5 * h * _phi1(0.5 * z)
        if abs(z) < 0.03:
            fa = 1 / 6 + z * (1 / 6 + z * (3 / 40 + z * (1 / 45 + z * (5 / 1008))))
            fb = 1 / 6 + z * (1 / 12 + z * (1 / 40 + z * (1 / 180 + z * (1 / 1008))))
            fg = 1 / 6 + z * z * (-1 / 120 + z * (-1 / 360 + z * (-1 / 1680)))
        else:
            ez = out[0, i]
            z3 = z * z * z
            fa = (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3
            fb = (2.0 + z + ez * (-2.0 + z)) / z3
            fg = (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3
        out[3, i] = h * fa
        out[4, i] = h * fb
        out[5, i] = h * fg


@njit(cache=True, nogil=True)
def _scaled_err(err, y0, y1, rtol, atol, scale_div):  # pragma: no cover
    acc = 0.0
    n = err.size
    for i in range(n):
        scale = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        q = abs(err[i]) / (scale * scale_div)
        acc += q * q
    return math.sqrt(acc / n)


@njit(cache=True, nogil=True)
def _etd_step(y, t, h, phi, lam, work, out,
              m, delta, w, g, gc, gam, gnr, gnl, pump,
              drive, phase_rate, shift):  # pragma: no cover - numba
    """One exponential RK step of size h from (t, y) into ``out``."""
    n = y.size
    ny = work[0]
    na = work[1]
    nb = work[2]
    nc = work[3]
    st = work[4]
    sa = work[5]

    _rhs_kernel(y, ny, m, delta, w, g, gc, gam, gnr, gnl, pump,
                drive, phase_rate, shift, t)
    for i in range(n):
        ny[i] -= lam[i] * y[i]

    for i in range(n):
        sa[i] = phi[1, i] * y[i] + phi[2, i] * ny[i]
    _rhs_kernel(sa, na, m, delta, w, g, gc, gam, gnr, gnl, pump,
                drive, phase_rate, shift, t + 0.5 * h)
    for i in range(n):
        na[i] -= lam[i] * sa[i]

    for i in range(n):
        st[i] = phi[1, i] * y[i] + phi[2, i] * na[i]
    _rhs_kernel(st, nb, m, delta, w, g, gc, gam, gnr, gnl, pump,
                drive, phase_rate, shift, t + 0.5 * h)
    for i in range(n):
        nb[i] -= lam[i] * st[i]

    for i in range(n):
        st[i] = phi[1, i] * sa[i] + phi[2, i] * (2.0 * nb[i] - ny[i])
    _rhs_kernel(st, nc, m, delta, w, g, gc, gam, gnr, gnl, pump,
                drive, phase_rate, shift, t + h)
    for i in range(n):
        nc[i] -= lam[i] * st[i]

    for i in range(n):
        out[i] = (phi[0, i] * y[i] + phi[3, i] * ny[i]
                  + 2.0 * phi[4, i] * (na[i] + nb[i]) + phi[5, i] * nc[i])


@njit(cache=True, nogil=True)
def _etd_chunk(y, t0, h0, t_end, max_accept, rtol, atol, h_cap, lam,
               m, delta, w, g, gc, gam, gnr, gnl, pump,
               drive, phase_rate, shift):  # pragma: no cover - numba
    """Advance in place with step-doubling error control on a x2 step ladder."""
    n = y.size
    phi_c = np.empty((6, n), dtype=np.complex128)
    phi_f = np.empty((6, n), dtype=np.complex128)
    work = np.empty((6, n), dtype=np.complex128)
    y_coarse = np.empty(n, dtype=np.complex128)
    y_half = np.empty(n, dtype=np.complex128)
    y_fine = np.empty(n, dtype=np.complex128)

    t = t0
    h = min(h0, h_cap)
    h_cached = -1.0
    grow = 0
    n_acc = 0
    n_rej = 0
    status = _MAXSTEPS
    last_err = 0.0
    if math.isfinite(t_end):
        t_guard = 1e-14 * abs(t_end) + 1e-300
    else:
        t_guard = 0.0

    while t < t_end - t_guard and n_acc < max_accept:
        h_try = h
        clipped = False
        if t + h_try > t_end:
            h_try = t_end - t
            clipped = True
        if h_try < _H_FLOOR:
            status = _UNDERFLOW
            break
        if h_try != h_cached:
            _fill_phi(lam, h_try, phi_c)
            _fill_phi(lam, 0.5 * h_try, phi_f)
            h_cached = h_try

        _etd_step(y, t, h_try, phi_c, lam, work, y_coarse,
                  m, delta, w, g, gc, gam, gnr, gnl, pump,
                  drive, phase_rate, shift)
        _etd_step(y, t, 0.5 * h_try, phi_f, lam, work, y_half,
                  m, delta, w, g, gc, gam, gnr, gnl, pump,
                  drive, phase_rate, shift)
        _etd_step(y_half, t + 0.5 * h_try, 0.5 * h_try, phi_f, lam, work, y_fine,
                  m, delta, w, g, gc, gam, gnr, gnl, pump,
                  drive, phase_rate, shift)

        # local extrapolation: error of the fine solution ~ (fine-coarse)/15
        for i in range(n):
            y_coarse[i] = y_fine[i] - y_coarse[i]
        err = _scaled_err(y_coarse, y, y_fine, rtol, atol, 15.0)

        if not math.isfinite(err):
            n_rej += 1
            grow = 0
            h = 0.25 * h_try
            continue
        if err <= 1.0:
            for i in range(n):
                y[i] = y_fine[i] + y_coarse[i] / 15.0
            t += h_try
            n_acc += 1
            last_err = err
            if err < 0.05:
                grow += 1
                if grow >= 2 and not clipped:
                    h = min(2.0 * h_try, h_cap)
                    grow = 0
            else:
                grow = 0
            if clipped:
                # keep the pre-clip ladder step for subsequent intervals
                h = max(h, h_try)
        else:
            n_rej += 1
            grow = 0
            h = 0.5 * h_try

    if t >= t_end - t_guard:
        status = _OK
    return t, h, n_acc, n_rej, status, last_err


# --------------------------------------------------------------------------
# plain embedded pair (numba, specialized to the hierarchy kernel)
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _rk_chunk(y, t0, h0, t_end, max_accept, rtol, atol, h_cap,
              a_tab, b_tab, e_tab, c_tab,
              m, delta, w, g, gc, gam, gnr, gnl, pump,
              drive, phase_rate, shift):  # pragma: no cover - numba
    n = y.size
    k = np.empty((7, n), dtype=np.complex128)
    yi = np.empty(n, dtype=np.complex128)
    y5 = np.empty(n, dtype=np.complex128)
    errv = np.empty(n, dtype=np.complex128)

    t = t0
    h = min(h0, h_cap)
    err_prev = 1.0
    n_acc = 0
    n_rej = 0
    status = _MAXSTEPS
    last_err = 0.0
    if math.isfinite(t_end):
        t_guard = 1e-14 * abs(t_end) + 1e-300
    else:
        t_guard = 0.0

    while t < t_end - t_guard and n_acc < max_accept:
        h_try = h
        if t + h_try > t_end:
            h_try = t_end - t
        if h_try > h_cap:
            h_try = h_cap
        if h_try < _H_FLOOR:
            status = _UNDERFLOW
            break

        _rhs_kernel(y, k[0], m, delta, w, g, gc, gam, gnr, gnl, pump,
                    drive, phase_rate, shift, t)
        for stg in range(1, 7):
            for i in range(n):
                acc = 0.0 + 0.0j
                for j in range(stg):
                    aij = a_tab[stg, j]
                    if aij != 0.0:
                        acc += aij * k[j, i]
                yi[i] = y[i] + h_try * acc
            _rhs_kernel(yi, k[stg], m, delta, w, g, gc, gam, gnr, gnl, pump,
                        drive, phase_rate, shift, t + c_tab[stg] * h_try)

        for i in range(n):
            accb = 0.0 + 0.0j
            acce = 0.0 + 0.0j
            for j in range(7):
                if b_tab[j] != 0.0:
                    accb += b_tab[j] * k[j, i]
                if e_tab[j] != 0.0:
                    acce += e_tab[j] * k[j, i]
            y5[i] = y[i] + h_try * accb
            errv[i] = h_try * acce

        err = _scaled_err(errv, y, y5, rtol, atol, 1.0)
        if not math.isfinite(err):
            n_rej += 1
            h = 0.25 * h_try
            continue
        if err <= 1.0:
            for i in range(n):
                y[i] = y5[i]
            t += h_try
            n_acc += 1
            last_err = err
            if err == 0.0:
                factor = 5.0
            else:
                factor = 0.9 * err ** -0.14 * err_prev ** 0.08
                factor = min(5.0, max(0.2, factor))
            err_prev = max(err, 1e-10)
            h = h_try * factor
        else:
            n_rej += 1
            h = h_try * max(0.2, 0.9 * err ** -0.2)

    if t >= t_end - t_guard:
        status = _OK
    return t, h, n_acc, n_rej, status, last_err


# --------------------------------------------------------------------------
# generic embedded pair for small dense systems (oracle)
# --------------------------------------------------------------------------

def dp54_adaptive(f, y0: np.ndarray, t0: float, t1: float,
                  rtol: float = 1e-8, atol: float = 1e-10,
                  h0: float | None = None, h_max: float = math.inf) -> np.ndarray:
    """Integrate ``y' = f(t, y)`` from t0 to t1 with the embedded 5(4) pair.

    Plain numpy implementation for moderate-sized dense systems; returns the
    final state.  Raises StiffnessError on step underflow.
    """
    y = np.asarray(y0).astype(np.complex128).copy()
    t = t0
    if h0 is None:
        fn = float(np.linalg.norm(f(t0, y)))
        yn = float(np.linalg.norm(y))
        h = min((0.01 * (yn + 1.0) / (fn + 1e-30)), (t1 - t0) / 10.0, h_max)
    else:
        h = h0
    err_prev = 1.0
    k = [None] * 7
    while t < t1 * (1 - 1e-14) - 1e-300:
        h = min(h, t1 - t, h_max)
        if h < _H_FLOOR:
            raise StiffnessError("generic integrator step underflow")
        k[0] = f(t, y)
        for s in range(1, 7):
            ys = y + h * sum(_A[s, j] * k[j] for j in range(s) if _A[s, j] != 0.0)
            k[s] = f(t + _C[s] * h, ys)
        y5 = y + h * sum(_B[j] * k[j] for j in range(7) if _B[j] != 0.0)
        ev = h * sum(_E[j] * k[j] for j in range(7) if _E[j] != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean(np.abs(ev / scale) ** 2)))
        if not math.isfinite(err):
            h *= 0.25
            continue
        if err <= 1.0:
            y = y5
            t += h
            fac = 5.0 if err == 0.0 else min(
                5.0, max(0.2, 0.9 * err ** -0.14 * err_prev ** 0.08))
            err_prev = max(err, 1e-10)
            h *= fac
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
    return y


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------

class _Driver:
    """Shared machinery for the public integration entry points."""

    def __init__(self, params: ModelParams, ens: Ensemble, cfg: IntegrationConfig,
                 frame: str = FRAME_CAVITY):
        self.ctx = RhsContext(params, ens, frame)
        self.cfg = cfg
        self.lam = build_linear_diagonal(self.ctx)
        max_rate = max(
            float(np.abs(self.lam).max()), params.gamma_nl, params.pump, 1e6
        )
        if cfg.method == "rk":
            h_cap = 3.0 / max_rate  # explicit stability on the fastest rotation
        else:
            h_cap = math.inf
        if cfg.dt_max is not None:
            h_cap = min(h_cap, cfg.dt_max)
        self.h_cap = h_cap
        self.h0 = cfg.dt_init if cfg.dt_init is not None else min(
            h_cap, 0.05 / max_rate
        )

    def kernel_args(self):
        c = self.ctx
        return (c.layout.n_bins, c.delta, c.weight, c.g, c.gamma_c, c.gamma,
                c.gamma_nr, c.gamma_nl, c.pump, complex(c.drive),
                c.phase_rate, c.frame_shift)

    def _chunk(self, y, t, h, t_target, max_accept):
        if self.cfg.method == "rk":
            return _rk_chunk(
                y, t, h, t_target, max_accept, self.cfg.rel_tol,
                self.cfg.abs_tol, self.h_cap, _A, _B, _E, _C,
                *self.kernel_args(),
            )
        return _etd_chunk(
            y, t, h, t_target, max_accept, self.cfg.rel_tol,
            self.cfg.abs_tol, self.h_cap, self.lam, *self.kernel_args(),
        )

    def advance(self, state: SystemState, t: float, t_target: float,
                h: float) -> tuple[float, float, int]:
        """Advance ``state`` in place to ``t_target``; returns (t, h, steps)."""
        cfg = self.cfg
        total = 0
        guard = abs(t_target) * 1e-14 + 1e-30
        while t < t_target - guard:
            t, h, n_acc, _, status, _ = self._chunk(
                state.y, t, h, t_target, cfg.symmetry_interval)
            total += n_acc
            if status == _UNDERFLOW:
                raise StiffnessError(
                    f"step size underflow at t={t:.3e}s (dt<{_H_FLOOR:g}s)"
                )
            self._check_finite(state)
            if n_acc >= cfg.symmetry_interval:
                self._enforce(state)
        return t, h, total

    def _check_finite(self, state: SystemState):
        if not np.all(np.isfinite(state.y.view(np.float64))):
            bad = int(np.flatnonzero(~np.isfinite(state.y))[0])
            raise NumericalBlowupError(state.layout.block_of_index(bad))

    def _enforce(self, state: SystemState):
        before = state.y.copy()
        fixed = enforce_symmetries(state)
        change = float(np.abs(fixed.y - before).max())
        scale = max(1.0, float(np.abs(before).max()))
        # population clamping may legitimately move entries by ~1e-9
        if change > max(self.cfg.abs_tol, 2e-9) * scale:
            raise SymmetryDriftError(
                f"symmetry enforcement moved the state by {change:.3e}"
            )
        state.y[:] = fixed.y

    def residual(self, state: SystemState, t: float) -> float:
        out = np.empty_like(state.y)
        rhs_flat(state.y, out, self.ctx, t)
        norm_state = float(np.linalg.norm(state.y))
        norm_rhs = float(np.linalg.norm(out))
        return norm_rhs / (self.ctx.gamma_c * max(norm_state, 1e-300))


def step(state: SystemState, t: float, dt: float, params: ModelParams,
         ens: Ensemble, cfg: IntegrationConfig,
         frame: str = FRAME_CAVITY) -> tuple[SystemState, float, float]:
    """One accepted adaptive step starting from proposed size ``dt``.

    Returns (new state, next step size, scaled local error estimate of the
    accepted step, <= 1).  Rejected attempts retry internally with a smaller
    step; underflow raises StiffnessError.
    """
    if dt <= 0:
        raise InvalidParameterError("dt must be > 0")
    drv = _Driver(params, ens, cfg, frame)
    out = state.copy()
    _, h, _, _, status, err = drv._chunk(out.y, t, min(dt, drv.h_cap), math.inf, 1)
    if status == _UNDERFLOW:
        raise StiffnessError("step size underflow")
    drv._check_finite(out)
    return out, h, err


def integrate_transient(state0: SystemState, t_end: float, n_samples: int,
                        params: ModelParams, ens: Ensemble,
                        cfg: IntegrationConfig, frame: str = FRAME_CAVITY,
                        t0: float = 0.0) -> Trajectory:
    """Integrate from ``t0`` to ``t_end`` sampling at uniform times.

    The first sample is the initial state at ``t0``; ``n_samples`` points in
    total (n_samples >= 2).
    """
    if n_samples < 2:
        raise InvalidParameterError("n_samples must be >= 2")
    if t_end <= t0:
        raise InvalidParameterError("t_end must exceed t0")
    drv = _Driver(params, ens, cfg, frame)
    times = np.linspace(t0, t_end, n_samples)
    state = state0.copy()
    out = [state.copy()]
    t, h = t0, drv.h0
    for target in times[1:]:
        t, h, _ = drv.advance(state, t, float(target), h)
        out.append(state.copy())
    return Trajectory(times, out)


def steady_residual(state: SystemState, params: ModelParams, ens: Ensemble,
                    frame: str = FRAME_CAVITY, t: float = 0.0) -> float:
    """Relative state change per cavity lifetime, ||rhs||/(gamma_c*||y||)."""
    drv = _Driver(params, ens, IntegrationConfig(), frame)
    return drv.residual(state, t)


# --------------------------------------------------------------------------
# fixed-point refinement
# --------------------------------------------------------------------------

_VECTOR_NAMES = ("pol", "fe", "fh", "d_pba", "d_fea", "d_fha", "d_adpb")
_COHERENCE_NAMES = ("pol", "d_pba", "d_fea", "d_fha", "d_pp", "d_epol", "d_hpol")
_REAL_MATRIX_NAMES = ("d_eh", "d_ee", "d_hh")


def _reduced_selection(layout, free_running: bool) -> np.ndarray:
    """Real-view indices of the genuinely dynamical unknowns.

    Excludes structurally-zero diagonals (their RHS is identically zero),
    imaginary parts of real-valued blocks, and, for free-running problems,
    the whole phase-carrying sector (kept bitwise zero).
    """
    m = layout.n_bins
    frozen = np.zeros(layout.size, dtype=bool)
    imag_only = np.zeros(layout.size, dtype=bool)
    diag = np.arange(m) * m + np.arange(m)
    for name in ("d_epol", "d_hpol") + _REAL_MATRIX_NAMES:
        frozen[layout.offset(name) + diag] = True
    for name in ("fe", "fh"):
        off = layout.offset(name)
        imag_only[off:off + m] = True
    imag_only[2] = True  # dada
    imag_only[layout.offset("d_pdp") + diag] = True
    for name in _REAL_MATRIX_NAMES:
        off = layout.offset(name)
        imag_only[off:off + m * m] = True
    if free_running:
        frozen[0] = frozen[1] = True  # a, daa
        for name in _COHERENCE_NAMES:
            off = layout.offset(name)
            size = m if name in _VECTOR_NAMES else m * m
            frozen[off:off + size] = True
    sel = np.zeros(2 * layout.size, dtype=bool)
    sel[0::2] = ~frozen
    sel[1::2] = ~(frozen | imag_only)
    return np.flatnonzero(sel)


def _newton_polish(state: SystemState, drv: _Driver, tol: float,
                   max_iter: int = 12) -> tuple[SystemState, float, bool]:
    """Matrix-free Newton refinement of a near-steady state.

    Solves rhs(y) = 0 on the reduced unknowns with finite-difference
    directional derivatives and diagonally preconditioned LGMRES.  Fails
    (returning the input unchanged) rather than leaving the basin: the
    update must shrink the residual and stay close to the starting point.
    """
    from scipy.sparse.linalg import LinearOperator, lgmres

    ctx = drv.ctx
    layout = ctx.layout
    free_running = ctx.drive == 0 and state.coherence_norm() == 0.0
    sel = _reduced_selection(layout, free_running)

    y_full = state.y.copy()
    base = y_full.view(np.float64).copy()

    lam = drv.lam.copy()
    weak = np.abs(lam) < 1e-3 * ctx.gamma_c
    lam[weak] = -ctx.gamma_c  # scale guard for undamped entries

    def f_reduced(x: np.ndarray) -> np.ndarray:
        flat = base.copy()
        flat[sel] = x
        out = np.empty(layout.size, dtype=np.complex128)
        rhs_flat(flat.view(np.complex128), out, ctx, 0.0)
        return out.view(np.float64)[sel].copy()

    def precondition(r: np.ndarray) -> np.ndarray:
        full = np.zeros(2 * layout.size)
        full[sel] = r
        z = full.view(np.complex128) / lam
        return z.view(np.float64)[sel].copy()

    x = base[sel].copy()
    scale0 = max(float(np.linalg.norm(y_full)), 1e-30)
    fx = f_reduced(x)
    fnorm = float(np.linalg.norm(fx))
    target = tol * ctx.gamma_c * scale0 * 0.3
    n_red = x.size
    prec = LinearOperator((n_red, n_red), matvec=precondition)

    for _ in range(max_iter):
        if fnorm <= target:
            break

        def jv(v: np.ndarray) -> np.ndarray:
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                return np.zeros_like(v)
            eps = 1e-8 * max(1.0, float(np.linalg.norm(x))) / nv
            return (f_reduced(x + eps * v) - fx) / eps

        j_op = LinearOperator((n_red, n_red), matvec=jv)
        dx, info = lgmres(j_op, -fx, M=prec, rtol=1e-3, atol=0.0,
                          maxiter=3, inner_m=40)
        if not np.all(np.isfinite(dx)):
            return state, fnorm / (ctx.gamma_c * scale0), False
        stepped = False
        for damp in (1.0, 0.5, 0.25, 0.0625):
            x_new = x + damp * dx
            f_new = f_reduced(x_new)
            fn = float(np.linalg.norm(f_new))
            if math.isfinite(fn) and fn < 0.9 * fnorm:
                x, fx, fnorm = x_new, f_new, fn
                stepped = True
                break
        if not stepped:
            break

    moved = float(np.linalg.norm(x - base[sel]))
    if fnorm > target or moved > 0.05 * scale0 + 1e-6:
        return state, fnorm / (ctx.gamma_c * scale0), False

    flat = base.copy()
    flat[sel] = x
    polished = SystemState(layout, flat.view(np.complex128).copy())
    try:
        polished = enforce_symmetries(polished)
    except SymmetryDriftError:
        return state, fnorm / (ctx.gamma_c * scale0), False
    residual = drv.residual(polished, 0.0)
    if residual >= tol or not np.all(np.isfinite(polished.y.view(np.float64))):
        return state, residual, False
    return polished, residual, True


def evolve_to_steady(state0: SystemState, params: ModelParams, ens: Ensemble,
                     cfg: IntegrationConfig,
                     frame: str = FRAME_CAVITY) -> tuple[SystemState, SteadyDiagnostics]:
    """Integrate forward to a fixed point of the autonomous RHS.

    Forward integration does the work; once the residual enters the
    fixed-point basin a matrix-free Newton refinement certifies the
    steady-state criterion ||rhs||/(gamma_c*||y||) < steady_tol, which the
    tolerance-limited forward trajectory alone cannot reach.  Requires an
    autonomous RHS: zero seed detuning in the cavity frame, or the seed
    frame (where any detuning is absorbed into the frequencies).
    Non-convergence within ``t_max`` is reported, not raised.
    """
    if frame == FRAME_CAVITY and params.detuning_inj != 0.0 and params.is_injected:
        raise InvalidParameterError(
            "steady state undefined for a detuned seed in the cavity frame; "
            "use the seed frame"
        )
    drv = _Driver(params, ens, cfg, frame)
    state = state0.copy()
    t, h = 0.0, drv.h0
    n_total = 0
    newton_gate = max(1e-4, 10.0 * cfg.steady_tol)

    # check cadence: a few cavity lifetimes, bounded by the time budget
    t_check = min(max(5.0 / params.gamma_c, cfg.t_max / 256.0), cfg.t_max / 4.0)
    residual = drv.residual(state, t)
    converged = residual < cfg.steady_tol
    while not converged and t < cfg.t_max:
        target = min(t + t_check, cfg.t_max)
        t, h, n_acc = drv.advance(state, t, target, h)
        n_total += n_acc
        residual = drv.residual(state, t)
        converged = residual < cfg.steady_tol
        if not converged and residual < newton_gate:
            state, residual, converged = _newton_polish(
                state, drv, cfg.steady_tol)
    return state, SteadyDiagnostics(
        t_reached=t, residual_norm=residual, converged=bool(converged),
        n_steps=n_total, dt_final=h,
    )
