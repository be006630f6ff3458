"""Peak extraction and intensity checks on sampled spectra."""
from __future__ import annotations

import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptySpectrum
from .regression import SpectrumSeries

COLUMNS = ("position", "height", "fwhm", "left_resolved", "right_resolved")


@dataclass(frozen=True)
class Peak:
    """A local maximum with sub-grid position and half-height width.

    ``left_resolved`` is False when the spectrum turns upward again before
    falling to half height on that side (an overlapping neighbour) or the
    grid ends first.  The width then comes from the resolved side alone.
    """

    position: float
    height: float
    fwhm: float
    left_resolved: bool = True
    right_resolved: bool = True


@dataclass
class PeakReport:
    peaks: list[Peak]
    spacings: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.peaks)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.peaks])

    @property
    def heights(self) -> np.ndarray:
        return np.array([p.height for p in self.peaks])

    def nearest(self, w: float) -> Peak:
        """Peak closest to ``w``."""
        if not self.peaks:
            raise LookupError("report holds no peaks")
        return self.peaks[int(np.argmin(np.abs(self.positions - w)))]

    def to_table(self) -> str:
        """Whitespace-separated table with a header line."""
        out = io.StringIO()
        out.write(" ".join(COLUMNS) + "\n")
        for p in self.peaks:
            out.write(f"{p.position!r} {p.height!r} {p.fwhm!r} "
                      f"{int(p.left_resolved)} {int(p.right_resolved)}\n")
        return out.getvalue()

    @classmethod
    def from_table(cls, text: str) -> "PeakReport":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or tuple(lines[0].split()) != COLUMNS:
            raise ValueError("not a peak table")
        peaks = []
        for ln in lines[1:]:
            a, b, c, d, e = ln.split()
            peaks.append(Peak(float(a), float(b), float(c), bool(int(d)), bool(int(e))))
        pos = np.array([p.position for p in peaks])
        return cls(peaks, np.diff(pos))

    def as_dicts(self) -> list[dict]:
        return [asdict(p) for p in self.peaks]


def _vertex(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Vertex of the parabola through three points (x need not be uniform)."""
    c2, c1, c0 = np.polyfit(x - x[1], y, 2)
    if c2 >= 0:
        return float(x[1]), float(y[1])
    xv = -c1 / (2 * c2)
    xv = min(max(xv, x[0] - x[1]), x[2] - x[1])
    return float(x[1] + xv), float(c0 + c1 * xv + c2 * xv * xv)


def _half_crossing(w, s, k, half, step):
    """Distance from w[k] to the half-height crossing walking by ``step``.

    Returns ``(distance, resolved)``; ``distance`` is None when unresolved.
    """
    j = k
    while 0 <= j + step < len(s):
        nxt = j + step
        if s[nxt] < half:
            # linear interpolation between j and nxt
            frac = (s[j] - half) / (s[j] - s[nxt])
            x = w[j] + frac * (w[nxt] - w[j])
            return abs(x - w[k]), True
        if s[nxt] > s[j]:
            return None, False
        j = nxt
    return None, False


def find_peaks(series: SpectrumSeries, rel_threshold: float = 1e-3) -> PeakReport:
    """Local maxima above ``rel_threshold`` times the global maximum.

    Positions and heights are refined by a parabola through the three
    samples around each maximum.  Widths use linear interpolation of the
    half-height crossings.

    Raises
    ------
    EmptySpectrum
        If the series is empty or its maximum is not positive.
    ValueError
        If ``rel_threshold`` is outside ``(0, 1)``.
    """
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    w, s = series.omega, series.s
    if s.size == 0 or not np.max(s) > 0:
        raise EmptySpectrum("spectrum has no positive values")
    floor = rel_threshold * np.max(s)
    peaks = []
    k = 1
    while k < len(s) - 1:
        # a plateau counts once, at its left end
        r = k
        while r + 1 < len(s) and s[r + 1] == s[k]:
            r += 1
        if s[k] > s[k - 1] and r + 1 < len(s) and s[k] > s[r + 1] and s[k] > floor:
            m = (k + r) // 2
            pos, h = _vertex(w[m - 1:m + 2], s[m - 1:m + 2]) if r == k else (w[m], s[m])
            half = h / 2
            dl, okl = _half_crossing(w, s, m, half, -1)
            dr, okr = _half_crossing(w, s, m, half, +1)
            if okl and okr:
                fwhm = dl + dr
            elif okl or okr:
                fwhm = 2 * (dl if okl else dr)
            else:
                fwhm = _valley_span(w, s, m)
            peaks.append(Peak(pos, float(h), float(fwhm), okl, okr))
        k = r + 1
    pos = np.array([p.position for p in peaks])
    return PeakReport(peaks, np.diff(pos),
                      {"rel_threshold": rel_threshold, "global_max": float(np.max(s))})


def _valley_span(w, s, k) -> float:
    """Width between the flanking minima of a peak with no half-height crossing."""
    lo = k
    while lo > 0 and s[lo - 1] <= s[lo]:
        lo -= 1
    hi = k
    while hi < len(s) - 1 and s[hi + 1] <= s[hi]:
        hi += 1
    return float(max(w[hi] - w[lo], w[min(k + 1, len(w) - 1)] - w[k]))


def integrated_intensity(series: SpectrumSeries) -> float:
    """Trapezoidal integral of the spectral density over the grid."""
    if len(series) < 2:
        return 0.0
    return float(np.trapezoid(series.s, series.omega))
