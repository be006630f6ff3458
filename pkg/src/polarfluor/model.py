"""Physical parameters of the driven polar two-level system.

Frequencies are expressed in units of the radiative damping constant ``gamma``
unless the caller chooses otherwise; only ratios enter the dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigError, IncommensurableFrequencies

DEFAULT_MAX_INTEGER = 10**5
DEFAULT_RTOL = 1e-9


@dataclass(frozen=True)
class AtomParams:
    omega0: float
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma!r}")
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise ConfigError(f"omega0 must be positive, got {self.omega0!r}")


@dataclass(frozen=True)
class DriveComponent:
    """One tone of the polychromatic field.

    ``delta_s`` is carried for bookkeeping only: it multiplies the identity
    operator and therefore never enters the equations of motion.
    """

    omega: float
    rabi: float = 0.0
    delta_a: float = 0.0
    phi: float = 0.0
    delta_s: float = 0.0

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ConfigError(f"drive frequency must be positive, got {self.omega!r}")
        if not (self.rabi >= 0 and math.isfinite(self.rabi)):
            raise ConfigError(f"Rabi frequency must be >= 0, got {self.rabi!r}")
        for name in ("delta_a", "phi", "delta_s"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def active(self) -> bool:
        """True when the tone couples to the dynamics at all."""
        return self.rabi != 0.0 or self.delta_a != 0.0


@dataclass(frozen=True)
class DipoleSet:
    """Dipole matrix elements and per-tone field amplitude vectors."""

    d00: Sequence[float]
    d11: Sequence[float]
    d10: Sequence[float]
    fields: Sequence[Sequence[float]] = field(default_factory=tuple)


def reduce_dipoles(dipoles: DipoleSet, hbar: float = 1.0):
    """Project field vectors on the dipole matrix elements.

    Returns a list of ``(rabi, delta_a, delta_s, phase_shift)`` tuples, one per
    field vector.  A negative projection on ``d10`` is folded into a phase
    shift of pi so that the returned Rabi frequency is non-negative
    (cos(x + pi) = -cos(x)).
    """
    d00 = np.asarray(dipoles.d00, dtype=float)
    d11 = np.asarray(dipoles.d11, dtype=float)
    d10 = np.asarray(dipoles.d10, dtype=float)
    out = []
    for e in dipoles.fields:
        e = np.asarray(e, dtype=float)
        rabi = -float(e @ d10) / hbar
        delta_a = float(e @ (d00 - d11)) / hbar
        delta_s = float(e @ (d00 + d11)) / hbar
        shift = 0.0
        if rabi < 0:
            # the whole coupling flips sign with the phase, so delta_a does too
            rabi, delta_a, delta_s, shift = -rabi, -delta_a, -delta_s, math.pi
        out.append((rabi, delta_a, delta_s, shift))
    return out


def drives_from_dipoles(dipoles: DipoleSet, omegas: Sequence[float],
                        phis: Sequence[float] | None = None,
                        hbar: float = 1.0) -> list[DriveComponent]:
    phis = [0.0] * len(omegas) if phis is None else list(phis)
    reduced = reduce_dipoles(dipoles, hbar)
    if not (len(reduced) == len(omegas) == len(phis)):
        raise ConfigError("one frequency and phase required per field vector")
    return [
        DriveComponent(omega=w, rabi=r, delta_a=da, delta_s=ds, phi=ph + shift)
        for w, ph, (r, da, ds, shift) in zip(omegas, phis, reduced)
    ]


@dataclass(frozen=True)
class FrequencyLattice:
    """Commensurable frequency lattice: every tone is ``n_j * nu``."""

    nu: float
    p: int
    n: tuple[int, ...]
    omega_s: float
    delta: float

    @property
    def omegas(self) -> tuple[float, ...]:
        return tuple(k * self.nu for k in self.n)

    def snap(self, drives: Sequence[DriveComponent]) -> list[DriveComponent]:
        """Return ``drives`` with frequencies replaced by exact lattice values."""
        if len(drives) != len(self.n):
            raise ConfigError("drive count does not match the lattice")
        return [replace(d, omega=k * self.nu) for d, k in zip(drives, self.n)]


def _smallest_fraction(x: float, rtol: float, max_den: int) -> Fraction | None:
    best = Fraction(x).limit_denominator(max_den)
    if abs(float(best) - x) > rtol * abs(x):
        return None
    lo, hi = 1, best.denominator
    while lo < hi:
        mid = (lo + hi) // 2
        f = Fraction(x).limit_denominator(mid)
        if abs(float(f) - x) <= rtol * abs(x):
            hi = mid
        else:
            lo = mid + 1
    return Fraction(x).limit_denominator(lo)


def commensurate(freqs: Sequence[float], max_integer: int = DEFAULT_MAX_INTEGER,
                 rtol: float = DEFAULT_RTOL) -> tuple[float, list[int]]:
    """Find the largest ``nu`` with every frequency an integer multiple of it.

    Returns ``(nu, integers)``.  Raises :class:`IncommensurableFrequencies`
    when no such ``nu`` exists with all integers ``<= max_integer``.
    """
    freqs = [float(f) for f in freqs]
    if not freqs or min(freqs) <= 0:
        raise ConfigError("frequencies must be positive")
    ref = max(freqs)
    fracs = []
    for f in freqs:
        fr = _smallest_fraction(f / ref, rtol, max_integer)
        if fr is None:
            raise IncommensurableFrequencies(
                f"{f!r} is not a rational multiple of {ref!r} within "
                f"rtol={rtol:g} and integers <= {max_integer}")
        fracs.append(fr)
    lcm_den = math.lcm(*(fr.denominator for fr in fracs))
    nums = [fr.numerator * (lcm_den // fr.denominator) for fr in fracs]
    g = math.gcd(*nums)
    ints = [k // g for k in nums]
    if max(ints) > max_integer:
        raise IncommensurableFrequencies(
            f"lattice integers {ints} exceed the bound {max_integer}")
    nu = ref / ints[freqs.index(ref)]
    return nu, ints


def build_lattice(atom: AtomParams, drives: Sequence[DriveComponent],
                  hf_indices: Sequence[int], *,
                  max_integer: int = DEFAULT_MAX_INTEGER,
                  rtol: float = DEFAULT_RTOL) -> FrequencyLattice:
    """Construct the lattice for ``drives``.

    The carrier ``omega_s`` is the mean frequency of the tones selected by
    ``hf_indices``; the detuning is ``omega0 - omega_s`` after snapping.
    """
    if not drives:
        raise ConfigError("at least one drive component is required")
    hf = list(hf_indices)
    if not hf or any(i < 0 or i >= len(drives) for i in hf):
        raise ConfigError(f"hf_indices {hf} do not select drives")
    omega_s = float(np.mean([drives[i].omega for i in hf]))
    nu, ints = commensurate([omega_s] + [d.omega for d in drives],
                            max_integer=max_integer, rtol=rtol)
    p, n = ints[0], tuple(ints[1:])
    omega_s = p * nu
    return FrequencyLattice(nu=nu, p=p, n=n, omega_s=omega_s,
                            delta=atom.omega0 - omega_s)


def prune_drives(drives: Sequence[DriveComponent], hf_indices: Sequence[int]):
    """Drop tones with zero coupling.

    Returns ``(drives, hf_indices)`` re-indexed.  Nothing is dropped when
    every high-frequency tone is inactive, since the carrier frame is defined
    by them.
    """
    keep = [i for i, d in enumerate(drives) if d.active]
    hf_keep = [i for i in hf_indices if i in keep]
    if not hf_keep:
        return list(drives), list(hf_indices)
    remap = {old: new for new, old in enumerate(keep)}
    return [drives[i] for i in keep], [remap[i] for i in hf_keep]
