"""Brute-force time-domain reference.

Integrates the lab-frame Bloch equations of the driven damped two-level
system with every ``cos(omega_j t + phi_j)`` kept explicit, then builds the
incoherent spectrum from the regression-theorem correlator by direct Fourier
quadrature.  It shares no code with the harmonic hierarchy and is meant for
reduced carrier frequencies (``omega0 ~ 200 gamma``).

Equations (``s = <S->``, ``sz = <Sz>``)::

    ds/dt  = -i h(t) s + 2i g(t) sz - gamma/2 s
    dsz/dt = -gamma/2 - gamma sz + i g(t) (s - conj(s))

with ``h = omega0 + sum_j delta_a_j cos(theta_j)`` and
``g = sum_j rabi_j cos(theta_j)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, StepUnderflow
from .model import AtomParams, DriveComponent
from .regression import SpectrumSeries

T_SETTLE = 30.0
TAU_MAX = 14.0
N_T0 = 16


def _coefficients(atom: AtomParams, drives: Sequence[DriveComponent], t):
    t = np.asarray(t, dtype=float)
    h = np.full(t.shape, atom.omega0)
    g = np.zeros(t.shape)
    for d in drives:
        c = np.cos(d.omega * t + d.phi)
        h = h + d.delta_a * c
        g = g + d.rabi * c
    return h, g


def _fastest(atom, drives) -> float:
    return max([atom.omega0] + [d.omega for d in drives])


@dataclass
class BlochTrajectory:
    t: np.ndarray
    sm: np.ndarray
    sp: np.ndarray
    sz: np.ndarray
    _dense: object = field(default=None, repr=False)

    def at(self, t):
        """``(sm, sz)`` at arbitrary times inside the integration span."""
        if self._dense is None:
            raise ValueError("trajectory carries no dense output")
        y = self._dense(np.atleast_1d(np.asarray(t, dtype=float)))
        return y[0] + 1j * y[1], y[2]

    def period_average(self, t_start: float, period: float, n: int = 256) -> float:
        """Mean of ``sz`` over ``[t_start, t_start + period)`` (rectangle rule)."""
        t = t_start + period * np.arange(n) / n
        _, sz = self.at(t)
        return float(np.mean(sz))


def integrate_bloch(atom: AtomParams, drives: Sequence[DriveComponent], t_end: float,
                    tol: float = 1e-10, initial_state="ground",
                    samples_per_period: int = 40,
                    sample_from: float = 0.0) -> BlochTrajectory:
    """Integrate from ``t = 0`` to ``t_end``.

    ``initial_state`` is ``"ground"``, ``"excited"`` or a pair ``(sm, sz)``.
    Samples are stored on a uniform grid from ``sample_from`` with at least
    ``samples_per_period`` points per period of the fastest frequency; a dense
    interpolant covers the whole span.
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ConfigError("tol must lie in [1e-12, 1e-6]")
    if initial_state == "ground":
        s0, z0 = 0j, -0.5
    elif initial_state == "excited":
        s0, z0 = 0j, 0.5
    else:
        s0, z0 = initial_state
        s0 = complex(s0)
    g_ = atom.gamma

    def rhs(t, y):
        h, g = _coefficients(atom, drives, t)
        u, v, sz = y
        return [h * v - g_ / 2 * u,
                -h * u + 2 * g * sz - g_ / 2 * v,
                -g_ / 2 - g_ * sz - 2 * g * v]

    wmax = _fastest(atom, drives)
    sol = solve_ivp(rhs, (0.0, t_end), [s0.real, s0.imag, z0], method="DOP853",
                    rtol=tol, atol=tol * 1e-2, dense_output=True)
    if sol.status != 0:
        raise StepUnderflow(sol.message)
    dt = 2 * math.pi / (samples_per_period * wmax)
    n = int(math.ceil((t_end - sample_from) / dt)) + 1
    t = np.linspace(sample_from, t_end, n)
    y = sol.sol(t)
    sm = y[0] + 1j * y[1]
    return BlochTrajectory(t, sm, np.conj(sm), y[2], sol.sol)


@dataclass
class TwoTimeGrid:
    """Connected correlator ``Y1(t0, t0 + tau)`` in the lab frame."""

    t0: np.ndarray
    tau: np.ndarray
    y1: np.ndarray  # shape (len(t0), len(tau))
    y2: np.ndarray
    y3: np.ndarray

    def equal_time(self) -> np.ndarray:
        return self.y1[:, 0]


def correlate(atom: AtomParams, drives: Sequence[DriveComponent],
              trajectory: BlochTrajectory, t0_set, tau_max: float = TAU_MAX,
              tol: float = 1e-10, samples_per_period: int = 40) -> TwoTimeGrid:
    """Propagate the regression initial data forward in ``tau`` for each ``t0``.

    All ``t0`` are integrated together as one vector system.
    """
    t0 = np.asarray(t0_set, dtype=float)
    sm, sz = trajectory.at(t0)
    sp = np.conj(sm)
    y0 = np.concatenate([0.5 + sz - sp * sm, -sp * sp, -0.5 * sp - sp * sz])
    k = t0.size
    g_ = atom.gamma

    def rhs(tau, y):
        h, g = _coefficients(atom, drives, t0 + tau)
        y1, y2, y3 = y[:k], y[k:2 * k], y[2 * k:]
        return np.concatenate([
            -1j * h * y1 + 2j * g * y3 - g_ / 2 * y1,
            1j * h * y2 - 2j * g * y3 - g_ / 2 * y2,
            -g_ * y3 + 1j * g * (y1 - y2),
        ])

    wmax = _fastest(atom, drives)
    dt = 2 * math.pi / (samples_per_period * wmax)
    tau = np.linspace(0.0, tau_max, int(math.ceil(tau_max / dt)) + 1)
    sol = solve_ivp(rhs, (0.0, tau_max), y0.astype(complex), method="DOP853",
                    rtol=tol, atol=tol * 1e-2, t_eval=tau)
    if sol.status != 0:
        raise StepUnderflow(sol.message)
    y = sol.y
    return TwoTimeGrid(t0, tau, y[:k], y[k:2 * k], y[2 * k:])


def spectrum_td(grid: TwoTimeGrid, omega_grid, omega_s: float,
                gamma: float = 1.0) -> SpectrumSeries:
    """Incoherent spectrum by trapezoidal Fourier quadrature of the t0-averaged correlator.

    The correlator is demodulated by ``exp(i omega_s tau)`` before the
    transform so the quadrature only sees the slow envelope.
    """
    if grid.tau[-1] < 12.0 / gamma:
        raise ConfigError("tau_max must be at least 12/gamma")
    w = np.asarray(omega_grid, dtype=float)
    tau = grid.tau
    env = grid.y1.mean(axis=0) * np.exp(1j * omega_s * tau)
    wts = np.full(tau.size, tau[1] - tau[0])
    wts[0] *= 0.5
    wts[-1] *= 0.5
    out = np.empty(w.size)
    for k in range(0, w.size, 64):
        ph = np.exp(1j * np.outer(w[k:k + 64] - omega_s, tau))
        out[k:k + 64] = (ph @ (env * wts)).real
    return SpectrumSeries(w, gamma / math.pi * out,
                          {"source": "oracle", "n_t0": grid.t0.size,
                           "tau_max": float(tau[-1])})


def t0_count(atom, drives, period: float) -> int:
    """Number of ``t0`` samples needed for an alias-free period average.

    Counter-rotating terms put harmonics near ``2 omega0 / nu`` into the
    correlator's ``t0`` dependence; an even grid of ``n`` points only
    averages harmonics below ``n`` exactly.
    """
    reach = math.ceil(_fastest(atom, drives) * period / (2 * math.pi))
    return max(N_T0, 4 * reach)


def oracle_run(atom: AtomParams, drives: Sequence[DriveComponent], period: float,
               omega_grid, omega_s: float, *, t_settle: float = T_SETTLE,
               n_t0: int | None = None, tau_max: float = TAU_MAX, tol: float = 1e-10):
    """Trajectory, period-averaged ``sz`` and spectrum for one scenario.

    ``period`` is the fundamental period ``2 pi / nu``; the ``t0`` samples are
    spread evenly over one period after ``t_settle``.  By default their number
    is :func:`t0_count`.
    """
    traj = integrate_bloch(atom, drives, t_settle + period, tol=tol,
                           sample_from=t_settle)
    wmax = _fastest(atom, drives)
    n_avg = max(256, 8 * int(math.ceil(wmax * period / (2 * math.pi))))
    sz_mean = traj.period_average(t_settle, period, n_avg)
    if n_t0 is None:
        n_t0 = t0_count(atom, drives, period)
    t0 = t_settle + period * np.arange(n_t0) / n_t0
    grid = correlate(atom, drives, traj, t0, tau_max=tau_max, tol=tol)
    spec = spectrum_td(grid, omega_grid, omega_s, atom.gamma)
    spec.meta["sz_mean"] = sz_mean
    return traj, sz_mean, grid, spec
