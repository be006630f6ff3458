"""Scenario configuration, figure presets, pipeline runs and sweeps.

A scenario is a plain mapping (YAML or JSON on disk)::

    name: fig5
    gamma: 1.0
    omega0: 5000
    drives:
      - {omega: 5000, rabi: 20, delta_a: 20}
      - {omega: 20, rabi: 6, delta_a: 6}
    hf_indices: [0]
    window: hf            # hf | lf | [lo, hi]
    grid_step: 0.05
    lmax: null            # null -> automatic cutoff with doubling check
    tol: 1.0e-8
    method: auto          # lu | eig | auto
    sweep: {path: drives.1.delta_a, values: "0:1:40"}
    outputs: {csv: out.csv, peaks: peaks.txt}

``sweep.path`` may also be a list of paths that all receive the same value.
Drives may be given through dipoles instead of ``rabi``/``delta_a``: a
top-level ``dipoles: {d00, d11, d10}`` plus a ``field`` vector per drive.
"""
from __future__ import annotations

import copy
import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

from . import analysis, floquet, regression
from .errors import ConfigError, PolarFluorError
from .model import (AtomParams, DEFAULT_MAX_INTEGER, DEFAULT_RTOL, DipoleSet,
                    DriveComponent, build_lattice, prune_drives, reduce_dipoles)

DRIVE_KEYS = {"omega", "rabi", "delta_a", "phi", "delta_s", "field"}
TOP_KEYS = {"name", "gamma", "omega0", "drives", "hf_indices", "window", "grid_step",
            "lmax", "tol", "method", "sweep", "outputs", "dipoles", "rel_threshold",
            "max_integer", "rtol"}


def _check_number(name, v, *, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{name} must be positive, got {v!r}")
    return float(v)


def parse_range(spec) -> np.ndarray:
    """Inclusive ``"start:step:stop"`` range, or an explicit list of values."""
    if isinstance(spec, (list, tuple)):
        vals = [_check_number("sweep value", v) for v in spec]
        if not vals:
            raise ConfigError("empty sweep value list")
        return np.array(vals)
    if not isinstance(spec, str):
        raise ConfigError(f"sweep values must be 'start:step:stop' or a list, got {spec!r}")
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"sweep range {spec!r} is not start:step:stop")
    try:
        start, step, stop = (float(x) for x in parts)
    except ValueError as exc:
        raise ConfigError(f"sweep range {spec!r} is not numeric") from exc
    for name, v in (("start", start), ("step", step), ("stop", stop)):
        _check_number(f"sweep {name}", v)
    if not step > 0:
        raise ConfigError("sweep step must be positive")
    if stop < start:
        raise ConfigError("sweep stop lies below start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1)


_PATH_TOKEN = re.compile(r"([A-Za-z_]\w*)|\[(\d+)\]|(\d+)")


def _split_path(path: str) -> list:
    keys = []
    for part in path.replace("[", ".[").split("."):
        if not part:
            continue
        m = _PATH_TOKEN.fullmatch(part)
        if not m:
            raise ConfigError(f"bad parameter path {path!r}")
        name, idx1, idx2 = m.groups()
        keys.append(name if name is not None else int(idx1 or idx2))
    if not keys:
        raise ConfigError("empty parameter path")
    return keys


def set_path(cfg: dict, path: str, value: float) -> None:
    """Assign ``value`` at ``path`` (``drives.1.rabi`` or ``drives[1].rabi``)."""
    keys = _split_path(path)
    node = cfg
    try:
        for k in keys[:-1]:
            node = node[k]
        old = node[keys[-1]]
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"parameter path {path!r} does not exist") from exc
    if isinstance(old, bool) or not isinstance(old, (int, float)):
        raise ConfigError(f"parameter path {path!r} is not a numeric scalar")
    node[keys[-1]] = float(value)


@dataclass(frozen=True)
class SweepSpec:
    paths: tuple[str, ...]
    values: np.ndarray


@dataclass
class ScenarioConfig:
    """Validated scenario.  ``raw`` keeps the source mapping for sweeps and echo."""

    name: str
    atom: AtomParams
    drives: list[DriveComponent]
    hf_indices: list[int]
    window: Any = "hf"
    grid_step: float = 0.05
    lmax: int | None = None
    tol: float = 1e-8
    method: str = "auto"
    rel_threshold: float = 1e-3
    max_integer: int = DEFAULT_MAX_INTEGER
    rtol: float = DEFAULT_RTOL
    sweep: SweepSpec | None = None
    outputs: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("scenario must be a mapping")
        raw = copy.deepcopy(dict(data))
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        if "omega0" not in raw or "drives" not in raw:
            raise ConfigError("omega0 and drives are required")
        atom = AtomParams(_check_number("omega0", raw["omega0"], positive=True),
                          _check_number("gamma", raw.get("gamma", 1.0), positive=True))
        drives = _parse_drives(raw["drives"], raw.get("dipoles"))
        hf = raw.get("hf_indices", [0])
        if (not isinstance(hf, list) or not hf
                or not all(isinstance(i, int) and not isinstance(i, bool) for i in hf)
                or any(i < 0 or i >= len(drives) for i in hf)):
            raise ConfigError(f"hf_indices {hf!r} must list drive indices")
        window = _parse_window(raw.get("window", "hf"))
        step = _check_number("grid_step", raw.get("grid_step", 0.05), positive=True)
        lmax = raw.get("lmax")
        if lmax is not None and (isinstance(lmax, bool) or not isinstance(lmax, int) or lmax < 0):
            raise ConfigError("lmax must be a non-negative integer or null")
        tol = _check_number("tol", raw.get("tol", 1e-8), positive=True)
        method = raw.get("method", "auto")
        if method not in ("auto", "lu", "eig"):
            raise ConfigError(f"method must be auto, lu or eig, got {method!r}")
        rel = _check_number("rel_threshold", raw.get("rel_threshold", 1e-3), positive=True)
        if rel >= 1:
            raise ConfigError("rel_threshold must be below 1")
        max_int = raw.get("max_integer", DEFAULT_MAX_INTEGER)
        if isinstance(max_int, bool) or not isinstance(max_int, int) or max_int < 1:
            raise ConfigError("max_integer must be a positive integer")
        rtol = _check_number("rtol", raw.get("rtol", DEFAULT_RTOL), positive=True)
        sweep = None
        if raw.get("sweep") is not None:
            sw = raw["sweep"]
            if not isinstance(sw, Mapping) or "path" not in sw or "values" not in sw:
                raise ConfigError("sweep needs path and values")
            paths = sw["path"] if isinstance(sw["path"], list) else [sw["path"]]
            if not paths or not all(isinstance(p, str) for p in paths):
                raise ConfigError("sweep path must be a string or list of strings")
            values = parse_range(sw["values"])
            probe = copy.deepcopy(raw)
            for p in paths:
                set_path(probe, p, float(values[0]))
            sweep = SweepSpec(tuple(paths), values)
        outputs = raw.get("outputs") or {}
        if not isinstance(outputs, Mapping):
            raise ConfigError("outputs must be a mapping")
        return cls(str(raw.get("name", "scenario")), atom, drives, list(hf), window, step,
                   lmax, tol, method, rel, max_int, rtol, sweep, dict(outputs), raw)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """New config with top-level keys replaced (``None`` values ignored)."""
        raw = copy.deepcopy(self.raw)
        raw.update({k: v for k, v in kw.items() if v is not None})
        return ScenarioConfig.from_dict(raw)

    def at(self, value: float) -> "ScenarioConfig":
        """The config with every sweep path set to ``value`` and no sweep."""
        if self.sweep is None:
            raise ConfigError("scenario has no sweep")
        raw = copy.deepcopy(self.raw)
        for p in self.sweep.paths:
            set_path(raw, p, value)
        raw.pop("sweep")
        raw["name"] = f"{self.name}@{value:g}"
        return ScenarioConfig.from_dict(raw)


def _parse_drives(items, dipoles) -> list[DriveComponent]:
    if not isinstance(items, list) or not items:
        raise ConfigError("drives must be a non-empty list")
    dip = None
    if dipoles is not None:
        try:
            dip = DipoleSet(np.asarray(dipoles["d00"], float), np.asarray(dipoles["d11"], float),
                            np.asarray(dipoles["d10"], float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("dipoles needs d00, d11, d10 vectors") from exc
    out = []
    for i, d in enumerate(items):
        if not isinstance(d, Mapping):
            raise ConfigError(f"drive {i} must be a mapping")
        unknown = set(d) - DRIVE_KEYS
        if unknown:
            raise ConfigError(f"drive {i}: unknown keys {sorted(unknown)}")
        if "omega" not in d:
            raise ConfigError(f"drive {i}: omega is required")
        vals = {k: _check_number(f"drive {i} {k}", d[k])
                for k in ("omega", "rabi", "delta_a", "phi", "delta_s") if k in d}
        if "field" in d:
            if dip is None:
                raise ConfigError(f"drive {i}: field given without dipoles")
            if {"rabi", "delta_a", "delta_s"} & set(d):
                raise ConfigError(f"drive {i}: give either field or rabi/delta_a")
            fd = DipoleSet(dip.d00, dip.d11, dip.d10, [d["field"]])
            rabi, da, ds, shift = reduce_dipoles(fd)[0]
            vals.update(rabi=rabi, delta_a=da, delta_s=ds,
                        phi=vals.get("phi", 0.0) + shift)
        out.append(DriveComponent(**vals))
    return out


def _parse_window(w):
    if w in ("hf", "lf"):
        return w
    if isinstance(w, str):
        try:
            w = [float(x) for x in w.split(",")]
        except ValueError as exc:
            raise ConfigError(f"window {w!r} is not hf, lf or lo,hi") from exc
    if isinstance(w, (list, tuple)) and len(w) == 2:
        lo, hi = (_check_number("window bound", x) for x in w)
        if not hi > lo:
            raise ConfigError("window upper bound must exceed the lower")
        return (lo, hi)
    raise ConfigError(f"window {w!r} is not hf, lf or [lo, hi]")


def load_config(path) -> ScenarioConfig:
    """Read a YAML or JSON scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ScenarioConfig.from_dict(data)


# -- presets ---------------------------------------------------------------

def _mono(rabi, delta_a=0.0):
    return {"omega": 5000.0, "rabi": rabi, "delta_a": delta_a}


def _bichromatic(name, second, **extra):
    return {"name": name, "gamma": 1.0, "omega0": 5000.0,
            "drives": [_mono(20.0, 20.0),
                       {"omega": 20.0, "rabi": second, "delta_a": second}],
            "hf_indices": [0], "window": "hf", **extra}


def _trichromatic(name, rabi, delta_hf, rabi3, delta3, **extra):
    return {"name": name, "gamma": 1.0, "omega0": 5000.0,
            "drives": [{"omega": 4980.0, "rabi": rabi, "delta_a": delta_hf},
                       {"omega": 5020.0, "rabi": rabi, "delta_a": delta_hf},
                       {"omega": 20.0, "rabi": rabi3, "delta_a": delta3}],
            "hf_indices": [0, 1], "window": "hf", **extra}


PRESETS: dict[str, dict] = {
    "fig1": {"name": "fig1", "gamma": 1.0, "omega0": 5000.0, "drives": [_mono(20.0)],
             "hf_indices": [0], "window": "hf"},
    "fig3": {**_bichromatic("fig3", 0.0), "window": "lf"},
    "fig4": _bichromatic("fig4", 2.0),
    "fig5": _bichromatic("fig5", 6.0),
    "fig6": _bichromatic("fig6", 40.0),
    "fig7": _bichromatic("fig7", 0.0, sweep={"path": ["drives.1.rabi", "drives.1.delta_a"],
                                             "values": "0:1:40"}),
    "fig8": _trichromatic("fig8", 20.0, 0.0, 20.0, 0.0),
    "fig9": {**_trichromatic("fig9", 20.0, 20.0, 0.0, 0.0), "window": "lf"},
    "fig10": _trichromatic("fig10", 20.0, 20.0, 20.0, 0.0,
                           sweep={"path": "drives.2.delta_a", "values": "0:2:40"}),
}


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return ScenarioConfig.from_dict(PRESETS[name])


# -- pipeline --------------------------------------------------------------

@dataclass
class ScenarioResult:
    series: regression.SpectrumSeries
    peaks: analysis.PeakReport | None
    state: floquet.HarmonicState
    system: regression.CorrelationSystem | None = None


def omega_grid(cfg: ScenarioConfig, drives=None, hf_indices=None) -> np.ndarray:
    drives = cfg.drives if drives is None else drives
    hf = cfg.hf_indices if hf_indices is None else hf_indices
    if cfg.window == "hf":
        return regression.hf_window(cfg.atom, drives, cfg.grid_step)
    if cfg.window == "lf":
        return regression.lf_window(drives, hf, cfg.grid_step)
    lo, hi = cfg.window
    return regression._grid(lo, hi, cfg.grid_step)


def _with_context(cfg, exc):
    try:
        return type(exc)(f"[{cfg.name}] {exc}")
    except TypeError:
        return exc


def solve_state(cfg: ScenarioConfig, frame_phase: complex = -1j):
    """Prune, build the lattice and solve the steady hierarchy.

    Returns ``(drives, lattice, state)`` for the pruned drive set.
    """
    drives, hf = prune_drives(cfg.drives, cfg.hf_indices)
    lattice = build_lattice(cfg.atom, drives, hf, max_integer=cfg.max_integer, rtol=cfg.rtol)
    drives = lattice.snap(drives)
    if cfg.lmax is None:
        state, _ = floquet.converge_truncation(cfg.atom, drives, lattice, tol=cfg.tol,
                                               frame_phase=frame_phase)
    else:
        state = floquet.steady_state(cfg.atom, drives, lattice, cfg.lmax, frame_phase)
    return drives, lattice, state


def run_scenario(cfg: ScenarioConfig, *, with_peaks: bool = True,
                 frame_phase: complex = -1j) -> ScenarioResult:
    """Full pipeline: lattice, steady state, correlation system, spectrum, peaks."""
    t_start = time.perf_counter()
    try:
        grid = omega_grid(cfg)
        drives, lattice, state = solve_state(cfg, frame_phase)
        cs = regression.build_correlation_system(cfg.atom, drives, lattice, state, frame_phase)
        meta = {"scenario": cfg.name, "nu": lattice.nu, "p": lattice.p,
                "n": list(lattice.n), "omega_s": lattice.omega_s,
                "steady_residual": state.residual, "x3_0": float(state.x3[state.l_max].real)}
        series = regression.spectrum(cs, grid, cfg.method, meta)
        peaks = None
        if with_peaks and np.max(series.s) > 0:
            peaks = analysis.find_peaks(series, cfg.rel_threshold)
    except PolarFluorError as exc:
        raise _with_context(cfg, exc) from exc
    series.meta["runtime_s"] = time.perf_counter() - t_start
    return ScenarioResult(series, peaks, state, cs)


@dataclass
class SweepResult:
    paths: tuple[str, ...]
    values: np.ndarray
    series: list  # SpectrumSeries or None on failure
    errors: dict = field(default_factory=dict)

    def long_table(self) -> np.ndarray:
        """Rows ``(sweep_value, omega, s)`` for every successful value."""
        rows = [np.column_stack([np.full(len(s), v), s.omega, s.s])
                for v, s in zip(self.values, self.series) if s is not None]
        return np.vstack(rows) if rows else np.empty((0, 3))


def _sweep_point(args):
    cfg, value = args
    try:
        return run_scenario(cfg.at(value), with_peaks=False).series, None
    except PolarFluorError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: ScenarioConfig, workers: int = 1) -> SweepResult:
    """Independent runs over the sweep values; failures are recorded per value."""
    if cfg.sweep is None:
        raise ConfigError(f"[{cfg.name}] scenario has no sweep")
    jobs = [(cfg, float(v)) for v in cfg.sweep.values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    errors = {v: e for (_, v), (_, e) in zip(jobs, results) if e is not None}
    return SweepResult(cfg.sweep.paths, cfg.sweep.values.copy(),
                       [s for s, _ in results], errors)


# -- reduced-scale oracle scenarios -----------------------------------------

def reduce_scale(cfg: ScenarioConfig, omega0: float = 200.0) -> ScenarioConfig:
    """Move the carrier to ``omega0`` keeping every offset from it.

    High-frequency tones shift with the transition; low-frequency tones and
    all couplings are unchanged.
    """
    shift = omega0 - cfg.atom.omega0
    raw = copy.deepcopy(cfg.raw)
    raw["omega0"] = float(omega0)
    for i in cfg.hf_indices:
        w = raw["drives"][i]["omega"] + shift
        if not w > 0:
            raise ConfigError("reduced carrier leaves a non-positive tone")
        raw["drives"][i]["omega"] = w
    raw["name"] = f"{cfg.name}-reduced"
    raw.pop("sweep", None)
    return ScenarioConfig.from_dict(raw)


# -- CSV -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header(meta: Mapping) -> list[str]:
    lines = []
    for k, v in meta.items():
        try:
            lines.append(f"# {k}: {json.dumps(v, default=_jsonable)}")
        except (TypeError, ValueError):
            lines.append(f"# {k}: {json.dumps(str(v))}")
    return lines


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError


def format_series_csv(series: regression.SpectrumSeries, extra: Mapping | None = None,
                      columns: Mapping[str, np.ndarray] | None = None) -> str:
    """``omega,s`` table (plus optional extra columns) with ``#`` metadata lines."""
    meta = {**series.meta, **(extra or {})}
    names = ["omega", "s"] + list(columns or {})
    cols = [series.omega, series.s] + [np.asarray(c) for c in (columns or {}).values()]
    lines = _header(meta) + [",".join(names)]
    lines += [",".join(_fmt(c[k]) for c in cols) for k in range(len(series))]
    return "\n".join(lines) + "\n"


def write_series_csv(path, series, extra=None, columns=None) -> None:
    Path(path).write_text(format_series_csv(series, extra, columns))


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Returns ``(meta, column_names, data)`` from a file written here."""
    meta, names, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            try:
                meta[k.strip()] = json.loads(v)
            except json.JSONDecodeError:
                meta[k.strip()] = v.strip()
        elif names is None:
            names = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    data = np.array(rows, dtype=float).reshape(-1, len(names or []))
    return meta, names or [], data


def read_series_csv(path) -> regression.SpectrumSeries:
    meta, names, data = read_csv(path)
    if names[:2] != ["omega", "s"]:
        raise ConfigError(f"{path} is not a spectrum table")
    return regression.SpectrumSeries(data[:, 0], data[:, 1], meta)


def format_sweep_csv(result: SweepResult, extra: Mapping | None = None) -> str:
    meta = {"sweep_paths": list(result.paths), **(extra or {})}
    if result.errors:
        meta["failed"] = {str(k): v for k, v in result.errors.items()}
    lines = _header(meta) + ["sweep_value,omega,s"]
    lines += [",".join(_fmt(x) for x in row) for row in result.long_table()]
    return "\n".join(lines) + "\n"


def write_sweep_csv(path, result: SweepResult, extra: Mapping | None = None) -> None:
    Path(path).write_text(format_sweep_csv(result, extra))


def iter_sweep_csv(path) -> Iterable[tuple[float, regression.SpectrumSeries]]:
    """Group a long-format sweep table back into per-value series."""
    _, names, data = read_csv(path)
    if names != ["sweep_value", "omega", "s"]:
        raise ConfigError(f"{path} is not a sweep table")
    for v in np.unique(data[:, 0]):
        rows = data[data[:, 0] == v]
        yield float(v), regression.SpectrumSeries(rows[:, 1], rows[:, 2])
