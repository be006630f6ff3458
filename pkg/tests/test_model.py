import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarfluor.errors import ConfigError, IncommensurableFrequencies
from polarfluor.model import (AtomParams, DipoleSet, DriveComponent, build_lattice,
                              commensurate, drives_from_dipoles, prune_drives, reduce_dipoles)

vec = st.lists(st.floats(-50, 50), min_size=3, max_size=3)


def test_reduce_orthogonal_field_keeps_only_symmetric_part():
    d = DipoleSet(d00=[0, 0, 3], d11=[0, 0, 3], d10=[1, 0, 0], fields=[[0, 1, 2]])
    rabi, da, ds, shift = reduce_dipoles(d)[0]
    assert (rabi, da) == (0, 0)
    assert ds == 12
    assert shift == 0


@given(vec, vec, vec)
def test_nonpolar_dipoles_have_no_asymmetry(d, d10, e):
    out = reduce_dipoles(DipoleSet(d, d, d10, [e]))
    assert out[0][1] == 0


def test_reduce_direct_dot_products():
    d = DipoleSet(d00=[20, 0, 0], d11=[0, 0, 0], d10=[-20, 0, 0], fields=[[1, 0, 0]])
    rabi, da, ds, shift = reduce_dipoles(d)[0]
    assert (rabi, da, shift) == (20, 20, 0)


def test_negative_rabi_folds_into_phase():
    d = DipoleSet(d00=[1, 0, 0], d11=[0, 0, 0], d10=[2, 0, 0], fields=[[1, 0, 0]])
    rabi, da, ds, shift = reduce_dipoles(d)[0]
    assert rabi == 2 and shift == math.pi
    # cos(x + pi) = -cos(x): the sign-flipped coupling is the original one
    x = np.linspace(0, 3, 7)
    assert np.allclose(rabi * np.cos(x + shift), -2 * np.cos(x))
    assert np.allclose(da * np.cos(x + shift), 1 * np.cos(x))


@given(vec, vec, vec, vec)
def test_reduce_is_linear_in_field(d00, d11, d10, e):
    e2 = [2 * x for x in e]
    a = reduce_dipoles(DipoleSet(d00, d11, d10, [e]))[0]
    b = reduce_dipoles(DipoleSet(d00, d11, d10, [e2]))[0]
    # compare signed values: rabi * cos(phase shift) undoes the sign folding
    sa = np.array(a[:3]) * math.cos(a[3])
    sb = np.array(b[:3]) * math.cos(b[3])
    assert np.allclose(sb, 2 * sa, rtol=1e-12, atol=1e-9)


def test_drives_from_dipoles_adds_shift_to_phase():
    d = DipoleSet([0, 0, 0], [0, 0, 0], [1, 0, 0], [[1, 0, 0], [-1, 0, 0]])
    drives = drives_from_dipoles(d, [100.0, 20.0], [0.5, 0.0])
    assert drives[0].phi == pytest.approx(0.5 + math.pi)
    assert drives[1].rabi == 1.0 and drives[1].phi == 0.0
    with pytest.raises(ConfigError):
        drives_from_dipoles(d, [100.0])


@pytest.mark.parametrize("kw", [dict(omega0=0), dict(omega0=1, gamma=0),
                                dict(omega0=1, gamma=float("nan"))])
def test_atom_validation(kw):
    with pytest.raises(ConfigError):
        AtomParams(**kw)


@pytest.mark.parametrize("kw", [dict(omega=0), dict(omega=1, rabi=-1),
                                dict(omega=1, delta_a=float("inf"))])
def test_drive_validation(kw):
    with pytest.raises(ConfigError):
        DriveComponent(**kw)


def test_lattice_bichromatic():
    lat = build_lattice(AtomParams(5000), [DriveComponent(5000, 20), DriveComponent(20, 2)], [0])
    assert (lat.omega_s, lat.nu, lat.p, lat.n, lat.delta) == (5000, 20, 250, (250, 1), 0)


def test_lattice_trichromatic():
    drives = [DriveComponent(4980, 20), DriveComponent(5020, 20), DriveComponent(20, 20)]
    lat = build_lattice(AtomParams(5000), drives, [0, 1])
    assert (lat.omega_s, lat.nu, lat.p, lat.n) == (5000, 20, 250, (249, 251, 1))


def test_lattice_rejects_irrational_ratio():
    with pytest.raises(IncommensurableFrequencies):
        build_lattice(AtomParams(5000), [DriveComponent(5000), DriveComponent(math.pi)], [0])


def test_integer_bound_is_enforced():
    with pytest.raises(IncommensurableFrequencies):
        commensurate([1.0, 1.0 + 1e-3], max_integer=100)
    nu, ints = commensurate([1.0, 1.001], max_integer=10**4)
    assert ints == [1000, 1001]


def test_detuned_carrier():
    lat = build_lattice(AtomParams(5003), [DriveComponent(5000, 20), DriveComponent(20, 2)], [0])
    assert lat.delta == pytest.approx(3.0)


@settings(max_examples=60)
@given(st.integers(1, 400), st.lists(st.integers(1, 400), min_size=1, max_size=3),
       st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_lattice_integers_scale_free(p, n, nu, scale):
    # the carrier is the first tone; rescaling every frequency keeps the integers
    freqs = [p * nu] + [k * nu for k in n]
    drives = [DriveComponent(w, 1.0) for w in freqs]
    a = build_lattice(AtomParams(freqs[0]), drives, [0])
    b = build_lattice(AtomParams(freqs[0] * scale), [DriveComponent(w * scale, 1.0) for w in freqs],
                      [0])
    assert (a.p, a.n) == (b.p, b.n)
    g = math.gcd(p, *n)
    assert a.p == p // g


@settings(max_examples=60)
@given(st.lists(st.integers(1, 500), min_size=2, max_size=4), st.floats(0.1, 50.0))
def test_snapping_is_exact(ints, nu):
    drives = [DriveComponent(k * nu * (1 + 1e-12), 1.0) for k in ints]
    lat = build_lattice(AtomParams(100.0), drives, [0])
    snapped = lat.snap(drives)
    assert lat.omega_s == lat.p * lat.nu
    assert all(d.omega == k * lat.nu for d, k in zip(snapped, lat.n))


def test_prune_drops_inactive_tones():
    drives = [DriveComponent(100, 1), DriveComponent(20), DriveComponent(40, 0, 2)]
    kept, hf = prune_drives(drives, [0])
    assert [d.omega for d in kept] == [100, 40] and hf == [0]
    # an all-inactive carrier set is left alone
    kept, hf = prune_drives([DriveComponent(100), DriveComponent(20, 1)], [0])
    assert len(kept) == 2 and hf == [0]


def test_hf_indices_must_select_drives():
    with pytest.raises(ConfigError):
        build_lattice(AtomParams(1), [DriveComponent(1)], [3])
