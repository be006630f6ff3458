"""Truncated harmonic hierarchy for the periodic steady state.

In the frame rotating at the carrier ``omega_s`` the atomic means are expanded
on the lattice harmonics ``exp(i l nu t)``::

    <S~->(t) = sum_l x1[l] e^{i l nu t},   S~- = c e^{i omega_s t} S-
    <S~+>(t) = sum_l x2[l] e^{i l nu t},   S~+ = conj(c) e^{-i omega_s t} S+
    <Sz>(t)  = sum_l x3[l] e^{i l nu t}

with frame phase ``c = -1j`` by default.  The Bloch equations of the driven
damped atom (no rotating-wave approximation) then become the linear system
``dx/dt = A x + b`` with constant ``A``.  The only approximation is the
cutoff ``|l| <= l_max``.

Unknowns are stored block-major: ``x[i * m + (l + l_max)]`` for block
``i in (0, 1, 2)`` and ``m = 2 * l_max + 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, SingularSystem, TruncationTooSmall
from .model import AtomParams, DriveComponent, FrequencyLattice

MARGIN = 16
LMAX_CAP = 4096
DENSE_BELOW = 2000


def stencil_reach(lattice: FrequencyLattice) -> int:
    """Largest index offset of any coupling, counter-rotating ones included."""
    return max(max(k + lattice.p, abs(lattice.p - k)) for k in lattice.n)


def default_lmax(lattice: FrequencyLattice, margin: int = MARGIN) -> int:
    return stencil_reach(lattice) + margin


def check_truncation(lattice: FrequencyLattice, l_max: int) -> None:
    """Raise unless every primary offset (n_j and p - n_j) fits in the cutoff."""
    need = max(max(k, abs(lattice.p - k)) for k in lattice.n)
    if l_max < need:
        raise TruncationTooSmall(
            f"l_max={l_max} cannot hold primary stencil offset {need}")


@dataclass(frozen=True)
class HarmonicState:
    """Steady-state harmonic amplitudes, indexed ``l = -l_max..l_max``."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    l_max: int
    nu: float
    residual: float = 0.0

    @property
    def l(self) -> np.ndarray:
        return np.arange(-self.l_max, self.l_max + 1)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x1, self.x2, self.x3])

    def amplitude(self, block: int, l: int) -> complex:
        if abs(l) > self.l_max:
            return 0j
        return (self.x1, self.x2, self.x3)[block][l + self.l_max]

    def restrict(self, l_max: int) -> "HarmonicState":
        if l_max > self.l_max:
            raise ValueError("cannot restrict to a larger cutoff")
        sl = slice(self.l_max - l_max, self.l_max + l_max + 1)
        return HarmonicState(self.x1[sl].copy(), self.x2[sl].copy(),
                             self.x3[sl].copy(), l_max, self.nu, self.residual)

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sum the harmonic series at times ``t`` (rotating frame)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ph = np.exp(1j * self.nu * np.outer(t, self.l))
        return ph @ self.x1, ph @ self.x2, ph @ self.x3

    def symmetry_error(self) -> float:
        """Max deviation from x2[l] = conj(x1[-l]) and x3[l] = conj(x3[-l])."""
        e12 = np.max(np.abs(self.x2 - np.conj(self.x1[::-1])))
        e33 = np.max(np.abs(self.x3 - np.conj(self.x3[::-1])))
        return float(max(e12, e33))


def assemble_steady(atom: AtomParams, drives: Sequence[DriveComponent],
                    lattice: FrequencyLattice, l_max: int,
                    frame_phase: complex = -1j):
    """Build ``A`` (sparse, CSC) and ``b`` with ``dx/dt = A x + b``.

    Couplings reaching beyond ``|l| <= l_max`` are dropped.
    """
    if len(drives) != len(lattice.n):
        raise ValueError("drives and lattice disagree in length")
    check_truncation(lattice, l_max)
    m = 2 * l_max + 1
    g, dlt, nu, p = atom.gamma, lattice.delta, lattice.nu, lattice.p
    c = complex(frame_phase)
    if not math.isclose(abs(c), 1.0):
        raise ValueError("frame_phase must have unit modulus")

    ls = np.arange(-l_max, l_max + 1)
    rows, cols, vals = [], [], []

    def couple(bi, bj, shift, value):
        # row (bi, l) receives value * x_bj[l + shift]
        if value == 0:
            return
        src = ls + shift
        ok = np.abs(src) <= l_max
        rows.append(bi * m + ls[ok] + l_max)
        cols.append(bj * m + src[ok] + l_max)
        vals.append(np.full(ok.sum(), value, dtype=complex))

    rows.append(np.arange(3 * m))
    cols.append(np.arange(3 * m))
    vals.append(np.concatenate([
        -(g / 2 + 1j * dlt + 1j * ls * nu),
        -(g / 2 - 1j * dlt + 1j * ls * nu),
        -(g + 1j * ls * nu),
    ]))

    for d, k in zip(drives, lattice.n):
        e, ec = np.exp(1j * d.phi), np.exp(-1j * d.phi)
        # frequency modulation by the permanent-dipole difference
        half = d.delta_a / 2
        couple(0, 0, -k, -1j * half * e)
        couple(0, 0, +k, -1j * half * ec)
        couple(1, 1, -k, +1j * half * e)
        couple(1, 1, +k, +1j * half * ec)
        # transition dipole coupling
        k1 = 1j * c * d.rabi
        couple(0, 2, -(k + p), k1 * e)
        couple(0, 2, -(p - k), k1 * ec)
        k2 = np.conj(k1)
        couple(1, 2, k + p, k2 * ec)
        couple(1, 2, p - k, k2 * e)
        k31 = 1j / c * d.rabi / 2
        k32 = -1j / np.conj(c) * d.rabi / 2
        couple(2, 0, -(k - p), k31 * e)
        couple(2, 0, k + p, k31 * ec)
        couple(2, 1, -(k + p), k32 * e)
        couple(2, 1, k - p, k32 * ec)

    A = sp.csc_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(3 * m, 3 * m))
    A.sum_duplicates()
    A.eliminate_zeros()
    b = np.zeros(3 * m, dtype=complex)
    b[2 * m + l_max] = -g / 2
    return A, b


def solve_steady(A, b, l_max: int, nu: float) -> HarmonicState:
    """Solve ``A x = -b`` (the stationary point of ``dx/dt = A x + b``)."""
    n = A.shape[0]
    with np.errstate(all="ignore"):
        if n < DENSE_BELOW:
            try:
                x = np.linalg.solve(A.toarray(), -b)
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(str(exc)) from exc
        else:
            try:
                lu = spla.splu(sp.csc_matrix(A))
            except RuntimeError as exc:
                raise SingularSystem(str(exc)) from exc
            x = lu.solve(-b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite steady-state solution")
    scale = max(np.max(np.abs(b)), np.finfo(float).tiny)
    res = float(np.max(np.abs(A @ x + b)) / scale)
    m = 2 * l_max + 1
    return HarmonicState(x[:m], x[m:2 * m], x[2 * m:], l_max, nu, res)


def steady_state(atom, drives, lattice, l_max=None, frame_phase=-1j) -> HarmonicState:
    if l_max is None:
        l_max = default_lmax(lattice)
    A, b = assemble_steady(atom, drives, lattice, l_max, frame_phase)
    return solve_steady(A, b, l_max, lattice.nu)


def converge_truncation(atom, drives, lattice, l_start=None, tol=1e-8,
                        cap=LMAX_CAP, frame_phase=-1j):
    """Double ``l_max`` until the amplitudes stop changing.

    Returns ``(state, l_final)`` where ``state`` is the solution at
    ``l_final`` and solving at ``2 * l_final`` changed no amplitude on the
    common range by ``tol`` or more.
    """
    l_cur = default_lmax(lattice) if l_start is None else int(l_start)
    check_truncation(lattice, l_cur)
    cur = steady_state(atom, drives, lattice, l_cur, frame_phase)
    while True:
        l_next = 2 * l_cur
        if l_next > cap:
            raise NoConvergence(f"no convergence below l_max cap {cap}")
        nxt = steady_state(atom, drives, lattice, l_next, frame_phase)
        change = np.max(np.abs(nxt.restrict(l_cur).vector - cur.vector))
        if change < tol:
            return cur, l_cur
        cur, l_cur = nxt, l_next
