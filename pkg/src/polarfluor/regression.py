"""Laplace-domain correlation system and the incoherent spectrum.

The connected correlators ``Y1 = <S~+(t) S~-(t+tau)> - <S~+(t)><S~-(t+tau)>``
(and the companions ``Y2``, ``Y3`` with ``S~+`` and ``Sz`` in the second slot)
evolve in ``tau`` with the homogeneous part of the steady-state generator.
With ``a0 = -A`` the Laplace amplitudes solve ``(a0 + z) y = r`` where ``r``
holds the harmonics of the equal-time connected moments.  The spectrum is
``S(w) = gamma/pi * Re y[Y1, l=0]`` at ``z = -i (w - omega_s)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import ConfigError, SingularSystem
from .floquet import HarmonicState, assemble_steady
from .model import AtomParams, DriveComponent, FrequencyLattice

EIG_MIN_DIM = 500
EIG_MIN_POINTS = 200


@dataclass
class SpectrumSeries:
    omega: np.ndarray
    s: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.omega.shape != self.s.shape:
            raise ValueError("omega and s must have equal length")

    def __len__(self):
        return len(self.omega)

    def value_at(self, w: float) -> float:
        return float(np.interp(w, self.omega, self.s))


def _trunc_conv(a: np.ndarray, b: np.ndarray, l_max: int) -> np.ndarray:
    """sum_r a[l - r] b[r] for |l| <= l_max, terms outside the range dropped."""
    return np.convolve(a, b)[l_max:3 * l_max + 1]


def build_rhs(state: HarmonicState) -> np.ndarray:
    """Harmonics of the equal-time connected moments (the Laplace sources)."""
    L = state.l_max
    half = np.zeros(2 * L + 1)
    half[L] = 0.5
    r1 = half + state.x3 - _trunc_conv(state.x1, state.x2, L)
    r2 = -_trunc_conv(state.x2, state.x2, L)
    r3 = -_trunc_conv(half + state.x3, state.x2, L)
    return np.concatenate([r1, r2, r3])


def _realify(l_max: int):
    """Basis in which the conjugation-symmetric generator is real.

    Columns pair ``(Y1, l)`` with ``(Y2, -l)`` and ``(Y3, l)`` with
    ``(Y3, -l)``.  Returns sparse ``(T, T_inv)``.
    """
    m = 2 * l_max + 1
    n = 3 * m
    rows, cols, vals = [], [], []
    col = 0
    for l in range(-l_max, l_max + 1):
        i, j = l + l_max, m + (-l + l_max)
        rows += [i, j, i, j]
        cols += [col, col, col + 1, col + 1]
        vals += [1, 1, 1j, -1j]
        col += 2
    c0, col0 = 2 * m + l_max, col
    rows.append(c0)
    cols.append(col0)
    vals.append(1)
    col += 1
    for l in range(1, l_max + 1):
        i, j = 2 * m + l + l_max, 2 * m - l + l_max
        rows += [i, j, i, j]
        cols += [col, col, col + 1, col + 1]
        vals += [1, 1, 1j, -1j]
        col += 2
    T = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n))
    # inverse of each 2x2 block [[1, i], [1, -i]] is 0.5 [[1, 1], [-i, i]]
    Tinv = T.conj().T.tocsr() * 0.5
    Tinv = Tinv.tolil()
    Tinv[col0, c0] = 1.0
    return T, Tinv.tocsr()


@dataclass(eq=False)
class CorrelationSystem:
    """Shifted linear system ``(a0 + z I) y = rhs`` for the Laplace amplitudes."""

    a0: sp.csc_matrix
    rhs: np.ndarray
    l_max: int
    omega_s: float
    gamma: float

    @property
    def dim(self) -> int:
        return self.a0.shape[0]

    @property
    def readout(self) -> int:
        """Index of the ``Y1, l = 0`` amplitude."""
        return self.l_max

    def shifted(self, z: complex) -> sp.csc_matrix:
        return (self.a0 + z * sp.identity(self.dim, dtype=complex, format="csc")).tocsc()

    @cached_property
    def _band(self):
        """RCM ordering and LAPACK band storage of ``a0`` (shared by all z)."""
        pat = abs(self.a0) + abs(self.a0).T
        perm = reverse_cuthill_mckee(sp.csr_matrix(pat), symmetric_mode=True)
        B = self.a0.tocsr()[perm][:, perm].tocoo()
        kl = int(max(0, (B.row - B.col).max()))
        ku = int(max(0, (B.col - B.row).max()))
        ab = np.zeros((2 * kl + ku + 1, self.dim), dtype=complex)
        ab[kl + ku + B.row - B.col, B.col] = B.data
        return perm, kl, ku, ab

    def solve(self, z: complex) -> np.ndarray:
        """Full solution vector at one shift via banded LU."""
        perm, kl, ku, ab = self._band
        work = ab.copy()
        work[kl + ku] += z
        _, _, y, info = lapack.zgbsv(kl, ku, work, self.rhs[perm],
                                     overwrite_ab=1, overwrite_b=1)
        if info != 0:
            raise SingularSystem(f"shifted system singular at z={z!r} (info={info})")
        out = np.empty_like(y)
        out[perm] = y
        return out

    def residual(self, z: complex, y: np.ndarray) -> float:
        scale = max(np.max(np.abs(self.rhs)), np.finfo(float).tiny)
        return float(np.max(np.abs(self.a0 @ y + z * y - self.rhs)) / scale)

    @cached_property
    def resolvent_expansion(self):
        """Poles and residues: ``y[readout](z) = sum_k w_k / (lam_k + z)``.

        Computed once from an eigendecomposition of ``a0`` written in the
        realified basis, where it is a real matrix.
        """
        T, Tinv = _realify(self.l_max)
        M = (Tinv @ self.a0 @ T).toarray()
        if np.max(np.abs(M.imag)) > 1e-12 * max(1.0, np.max(np.abs(M.real))):
            lam, V = sla.eig(self.a0.toarray(), check_finite=False)
            left = V[self.readout]
            coef = sla.solve(V, self.rhs, check_finite=False)
        else:
            lam, V = sla.eig(M.real, check_finite=False)
            left = T[self.readout] @ V
            left = np.asarray(left).ravel()
            coef = sla.solve(V, Tinv @ self.rhs, check_finite=False)
        return lam, left * coef


def build_correlation_system(atom: AtomParams, drives: Sequence[DriveComponent],
                             lattice: FrequencyLattice, state: HarmonicState,
                             frame_phase: complex = -1j) -> CorrelationSystem:
    A, _ = assemble_steady(atom, drives, lattice, state.l_max, frame_phase)
    return CorrelationSystem(a0=(-A).tocsc(), rhs=build_rhs(state),
                             l_max=state.l_max, omega_s=lattice.omega_s,
                             gamma=atom.gamma)


def solve_correlation(sys: CorrelationSystem, z: complex) -> complex:
    """``Y1`` zero-harmonic Laplace amplitude at shift ``z``."""
    y = sys.solve(z)
    res = sys.residual(z, y)
    if not np.isfinite(res) or res > 1e-10:
        raise SingularSystem(f"residual {res:.3g} at z={z!r}")
    return complex(y[sys.readout])


def _pick_method(sys: CorrelationSystem, npts: int, method: str) -> str:
    if method == "auto":
        return "eig" if sys.dim >= EIG_MIN_DIM and npts >= EIG_MIN_POINTS else "lu"
    if method not in ("lu", "eig"):
        raise ConfigError(f"unknown spectrum method {method!r}")
    return method


def resolvent_values(sys: CorrelationSystem, z: np.ndarray, method: str = "lu"):
    """Complex ``Y1`` readout at each shift in ``z``; returns ``(values, max_residual)``."""
    z = np.asarray(z, dtype=complex)
    method = _pick_method(sys, z.size, method)
    if method == "eig":
        lam, w = sys.resolvent_expansion
        out = np.empty(z.size, dtype=complex)
        for k in range(0, z.size, 256):
            zz = z[k:k + 256]
            out[k:k + 256] = (w[None, :] / (lam[None, :] + zz[:, None])).sum(axis=1)
        return out, float("nan")
    out = np.empty(z.size, dtype=complex)
    worst = 0.0
    for k, zk in enumerate(z):
        y = sys.solve(zk)
        worst = max(worst, sys.residual(zk, y))
        out[k] = y[sys.readout]
    if not np.isfinite(worst) or worst > 1e-10:
        raise SingularSystem(f"shifted solves left residual {worst:.3g}")
    return out, worst


def spectrum(sys: CorrelationSystem, omega_grid, method: str = "lu",
             meta: dict | None = None) -> SpectrumSeries:
    """Incoherent spectrum on ``omega_grid``.

    ``method='lu'`` factorizes each shifted matrix (banded, one ordering
    reused); ``'eig'`` evaluates a single eigen-expansion for all points;
    ``'auto'`` picks ``eig`` for large systems on long grids.
    """
    w = np.asarray(omega_grid, dtype=float)
    if w.ndim != 1 or not np.all(np.isfinite(w)):
        raise ConfigError("omega grid must be a finite 1-D array")
    if w.size > 1 and np.any(np.diff(w) <= 0):
        raise ConfigError("omega grid must be strictly increasing")
    chosen = _pick_method(sys, w.size, method)
    vals, res = resolvent_values(sys, -1j * (w - sys.omega_s), chosen)
    s = sys.gamma / math.pi * vals.real
    info = {"l_max": sys.l_max, "dim": sys.dim, "method": chosen,
            "max_residual": res}
    info.update(meta or {})
    return SpectrumSeries(w, s, info)


def sum_rule(state: HarmonicState, gamma: float) -> float:
    """Expected frequency integral of the spectrum: gamma * r1[l=0]."""
    return gamma * float(build_rhs(state)[state.l_max].real)


def _grid(lo: float, hi: float, step: float, include_lo: bool = True) -> np.ndarray:
    if not step > 0:
        raise ConfigError("grid step must be positive")
    n = int(round((hi - lo) / step))
    k = np.arange(0 if include_lo else 1, n + 1)
    return lo + step * k


def drive_scale(drives: Sequence[DriveComponent]) -> float:
    return max([max(d.rabi, abs(d.delta_a)) for d in drives] + [0.0])


def hf_window(atom: AtomParams, drives, step: float = 0.05, factor: float = 3.5) -> np.ndarray:
    """Grid centred on the transition, half-width ``factor`` times the largest coupling."""
    half = factor * drive_scale(drives)
    if half == 0:
        half = 10.0 * atom.gamma
    return _grid(atom.omega0 - half, atom.omega0 + half, step)


def lf_window(drives, hf_indices, step: float = 0.05, factor: float = 3.0) -> np.ndarray:
    """Grid ``(0, factor * max HF Rabi frequency]``."""
    top = factor * max([drives[i].rabi for i in hf_indices] + [0.0])
    if top <= 0:
        raise ConfigError("low-frequency window needs a driven high-frequency tone")
    return _grid(0.0, top, step, include_lo=False)
