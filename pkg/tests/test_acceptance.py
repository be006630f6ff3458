"""One test per acceptance criterion, each at its stated tolerance.

Every test records a PASS/FAIL line; the summary is printed at the end of the
session.  Full-scale spectra are cached for the session since several
criteria share them.
"""
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE, cached_run
from polarfluor import regression
from polarfluor.analysis import find_peaks, integrated_intensity
from polarfluor.floquet import steady_state
from polarfluor.oracle import oracle_run
from polarfluor.scenario import preset, reduce_scale, solve_state

W0 = 5000.0


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def variant(name, **drive_patch):
    """Preset with per-drive overrides, e.g. ``d0={'rabi': 15}``."""
    cfg = preset(name)
    raw = cfg.raw
    for key, patch in drive_patch.items():
        if key.startswith("d"):
            raw["drives"][int(key[1:])].update(patch)
        else:
            raw[key] = patch
    return type(cfg).from_dict(raw)


def near(report, w, tol):
    """Peak within ``tol`` of ``w`` or None."""
    if not report.peaks:
        return None
    p = report.nearest(w)
    return p if abs(p.position - w) <= tol else None


def test_criterion_1_mollow_baseline():
    res = cached_run("fig1", preset("fig1"))
    rep = res.peaks
    ok = len(rep) == 3
    detail = f"{len(rep)} peaks"
    if ok:
        lo, c, hi = rep.peaks
        side_ok = abs(lo.position - (W0 - 20)) <= 0.5 and abs(hi.position - (W0 + 20)) <= 0.5
        h = (lo.height + hi.height) / 2 / c.height
        f = (lo.fwhm + hi.fwhm) / 2 / c.fwhm
        ok = side_ok and abs(h / (1 / 3) - 1) <= 0.1 and abs(f / 1.5 - 1) <= 0.1
        detail += (f"; sidebands at {lo.position - W0:+.3f}, {hi.position - W0:+.3f}; "
                   f"height ratio {h:.4f}; width ratio {f:.4f}")
    record(1, ok, detail)


def test_criterion_2_polar_low_frequency_peak():
    rep = cached_run("fig3", preset("fig3")).peaks
    top = rep.peaks[int(np.argmax(rep.heights))]
    polar_ok = abs(top.position - 20.0) <= 2.0
    lf = cached_run("fig3-nonpolar", variant("fig3", d0={"delta_a": 0.0})).series
    hf = cached_run("fig1", preset("fig1")).series
    ratio = np.max(lf.s) / np.max(hf.s)
    record(2, polar_ok and ratio <= 1e-3,
           f"dominant low-frequency peak at {top.position:.3f}; "
           f"non-polar low-frequency max / high-frequency max = {ratio:.2e}")


def test_criterion_3_central_peak_splitting():
    res = cached_run("fig5", preset("fig5"))
    rep, s = res.peaks, res.series
    missing = [d for d in (-3, 3, -23, -17, 17, 23) if near(rep, W0 + d, 0.5) is None]
    doublet = [near(rep, W0 + d, 0.5) for d in (-3, 3)]
    ratio = float("nan")
    if all(doublet):
        ratio = s.value_at(W0) / max(p.height for p in doublet)
    record(3, not missing and ratio < 0.1,
           f"missing components {missing}; density at line centre / doublet height = {ratio:.4f}")


def test_criterion_4_equidistant_spectrum():
    rep = cached_run("fig6", preset("fig6")).peaks
    pos = rep.positions - W0
    ok = len(rep) == 9
    detail = f"{len(rep)} peaks"
    if ok:
        dev = np.max(np.abs(rep.spacings - 20.0))
        mirror = np.max(np.abs(pos + pos[::-1]))
        ok = dev <= 1.0 and mirror <= 1.0 and abs(pos[4]) <= 1.0
        detail += f"; max spacing deviation {dev:.3f}; mirror asymmetry {mirror:.3f}"
    record(4, ok, detail)


def test_criterion_5_trichromatic_comb():
    window = [W0 - 70, W0 + 70]
    reports = {}
    for rabi in (15.0, 20.0, 25.0):
        cfg = variant("fig8", d0={"rabi": rabi}, d1={"rabi": rabi}, window=window)
        reports[rabi] = cached_run(f"fig8-rabi{rabi:g}", cfg).peaks
    problems = []
    for rabi, rep in reports.items():
        pos = rep.positions - W0
        off = np.abs(pos - 20.0 * np.round(pos / 20.0))
        if np.max(off) > 1.0 or np.max(np.abs(rep.spacings - 20.0)) > 1.0:
            problems.append(f"rabi {rabi:g}: off-comb {np.max(off):.3f}")
    ref = reports[20.0]
    drift = 0.0
    for p in ref.peaks:
        for rabi in (15.0, 25.0):
            q = near(reports[rabi], p.position, 1.0)
            if q is None:
                problems.append(f"peak {p.position - W0:+.1f} missing at rabi {rabi:g}")
            else:
                drift = max(drift, abs(q.position - p.position))
    record(5, not problems,
           f"comb orders {sorted({int(k) for k in np.round((ref.positions - W0) / 20)})}; "
           f"max drift {drift:.3f}; {problems or 'no problems'}")


def test_criterion_6_polar_low_frequency_comb():
    res = cached_run("fig9", preset("fig9"))
    rep = res.peaks
    spacing_dev = np.max(np.abs(rep.spacings - 20.0)) if len(rep) > 1 else math.inf
    top = rep.peaks[int(np.argmax(rep.heights))]
    weaker = cached_run("fig9-delta10", variant("fig9", d0={"delta_a": 10.0},
                                               d1={"delta_a": 10.0})).series
    grows = [p.height > weaker.value_at(p.position) for p in rep.peaks]
    record(6, spacing_dev <= 1.0 and abs(top.position - 20.0) <= 2.0 and all(grows),
           f"peaks at {np.round(rep.positions, 2).tolist()}; spacing deviation {spacing_dev:.3f}; "
           f"tallest at {top.position:.3f}; heights grow with asymmetry: {grows}")


def test_criterion_7_transistor_sweep():
    base = preset("fig10")
    values = base.sweep.values
    runs = [cached_run(f"fig10@{v:g}", base.at(float(v))) for v in values]
    ref = runs[0].peaks
    problems = []
    for p in ref.peaks:
        heights, drift = [], 0.0
        for v, r in zip(values, runs):
            q = near(r.peaks, p.position, 1.0)
            if q is None:
                problems.append(f"peak {p.position - W0:+.1f} lost at {v:g}")
                break
            heights.append(q.height)
            drift = max(drift, abs(q.position - p.position))
        rises = [(float(values[k + 1]), heights[k + 1] / heights[k])
                 for k in range(len(heights) - 1) if heights[k + 1] > heights[k] * (1 + 1e-9)]
        if rises:
            problems.append(f"peak {p.position - W0:+.1f} rises at delta3={rises[0][0]:g} "
                            f"(x{rises[0][1]:.3f}, {len(rises)} rises)")
    mid = cached_run("fig10@20", base.at(20.0)).series
    spread = 0.0
    for rabi in (10.0, 30.0):
        cfg = base.at(20.0)
        raw = cfg.raw
        raw["drives"][2]["rabi"] = rabi
        # the automatic window scales with the largest Rabi frequency
        raw["window"] = [float(mid.omega[0]), float(mid.omega[-1])]
        other = cached_run(f"fig10@20-rabi{rabi:g}", type(cfg).from_dict(raw)).series
        spread = max(spread, np.max(np.abs(other.s - mid.s)) / np.max(mid.s))
    if spread > 0.01:
        problems.append(f"low-frequency Rabi dependence {spread:.4f}")
    record(7, not problems,
           f"{len(ref)} reference peaks; Rabi dependence {spread:.2e}; {problems or 'no problems'}")


def test_criterion_8_phase_independence():
    ref = cached_run("fig5", preset("fig5")).series
    worst = 0.0
    for phi in (math.pi / 3, math.pi):
        s = cached_run(f"fig5-phi{phi:.4f}", variant("fig5", d1={"phi": phi})).series
        worst = max(worst, np.max(np.abs(s.s - ref.s)) / np.max(ref.s))
    record(8, worst <= 1e-6, f"max relative pointwise difference {worst:.2e}")


@pytest.mark.parametrize("name", ["fig1", "fig4", "fig8"])
def test_criterion_9_oracle_equivalence(name):
    cfg = reduce_scale(preset(name))
    drives, lattice, state = solve_state(cfg)
    grid = regression.hf_window(cfg.atom, drives, cfg.grid_step)
    cs = regression.build_correlation_system(cfg.atom, drives, lattice, state)
    ours = regression.spectrum(cs, grid, "lu").s
    _, sz_mean, _, spec = oracle_run(cfg.atom, drives, 2 * math.pi / lattice.nu, grid,
                                     lattice.omega_s)
    dev = np.max(np.abs(spec.s - ours)) / np.max(ours)
    dx3 = abs(sz_mean - state.x3[state.l_max].real)
    ok = dev <= 0.03 and dx3 <= 1e-4
    previous = ACCEPTANCE.get(9, (True, ""))
    detail = (previous[1] + "; " if previous[1] else "") + \
        f"{name}: spectrum {dev:.2e} of max, x3 {dx3:.1e}"
    ACCEPTANCE[9] = (previous[0] and ok, detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion 9 ({name}): spectrum {dev:.2e} of max, x3 {dx3:.1e}")
    assert ok


def test_criterion_10_invariant_suite():
    names = ["fig1", "fig5", "fig8"]
    cfgs = {"fig1": preset("fig1"), "fig5": preset("fig5"), "fig8": preset("fig8")}
    runs = {n: cached_run(n, cfgs[n]) for n in names}
    problems = []

    sym = max(r.state.symmetry_error() for r in runs.values())
    if sym > 1e-8:
        problems.append(f"symmetry {sym:.1e}")

    floor = min(np.min(r.series.s) / np.max(r.series.s) for r in runs.values())
    if floor < -1e-6:
        problems.append(f"positivity {floor:.1e}")

    conv, equiv = 0.0, 0.0
    for n, r in runs.items():
        cfg = cfgs[n]
        drives, lattice, state = solve_state(cfg)
        idx = np.linspace(0, len(r.series) - 1, 57).astype(int)
        w = r.series.omega[idx]
        big_state = steady_state(cfg.atom, drives, lattice, 2 * state.l_max)
        big = regression.build_correlation_system(cfg.atom, drives, lattice, big_state)
        doubled = regression.spectrum(big, w, "lu").s
        scale = np.max(r.series.s)
        conv = max(conv, np.max(np.abs(doubled - r.series.s[idx])) / scale)
        lu = regression.spectrum(r.system, w, "lu").s
        eig = regression.spectrum(r.system, w, "eig").s
        equiv = max(equiv, np.max(np.abs(lu - eig)) / scale)
    if conv > 1e-6:
        problems.append(f"truncation {conv:.1e}")
    if equiv > 1e-8:
        problems.append(f"resolvent paths {equiv:.1e}")

    rule = 0.0
    for n in ("fig1", "fig5"):
        r = runs[n]
        w = np.arange(W0 - 2000.0, W0 + 2000.0 + 1e-9, 0.05)
        wide = regression.spectrum(r.system, w, "eig" if r.system.dim > 500 else "lu")
        total = integrated_intensity(wide)
        rule = max(rule, abs(total / regression.sum_rule(r.state, 1.0) - 1))
    if rule > 0.01:
        problems.append(f"sum rule {rule:.2e}")

    record(10, not problems,
           f"symmetry {sym:.1e}, positivity floor {floor:.1e}, doubling {conv:.1e}, "
           f"lu/eig {equiv:.1e}, sum rule {rule:.1e}; {problems or 'no problems'}")
