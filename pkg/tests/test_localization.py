import math

import numpy as np
import pytest

from conewave.constants import DESK, DeskConstants
from conewave.errors import DiskTooSmall, GridTooCoarse, MarginTooSmall, RegionExceedsTorus
from conewave.families import FamilySpec, random_wave
from conewave.geometry import Disk, cone_distance
from conewave.localization import (
    cutoff_report, disk_l2_squared, evolution_symbol, huygens_report, make_cutoff, make_eta,
    project_disk, project_disk_pair, propagation_kernel,
)
from conewave.waves import TorusDomain, energy, plane_wave, sample_slice, wave_packet, zero_wave


@pytest.fixture(scope="module")
def dom():
    return TorusDomain(2, 64.0, 256)


@pytest.mark.parametrize("r", [2.0, 4.0, 8.0])
def test_eta_mass_sign_and_fourier_support(dom, r):
    eta = make_eta(r, dom)
    assert eta.mass == pytest.approx(1.0, abs=1e-6)
    assert eta.grid.min() >= 0.0
    assert eta.fourier_radius() < 1.0 / r
    # transform the grid back and look at every coefficient outside radius 1/r
    M = dom.grid_points
    c = np.fft.fftn(eta.grid) / M ** 2
    m = np.fft.fftfreq(M, 1.0 / M)
    rad = np.hypot(*np.meshgrid(m, m, indexing="ij")) / dom.period
    assert np.max(np.abs(c[rad >= 1.0 / r])) <= 1e-10


def test_eta_grid_too_coarse(dom):
    with pytest.raises(GridTooCoarse):
        make_eta(0.5, dom)


def test_evolution_symbol_range_and_plateau():
    rng = np.random.default_rng(0)
    xi = rng.uniform(-4, 4, (20_000, 2))
    a = evolution_symbol(xi, 0)
    assert np.all((a >= 0) & (a <= 1))
    th = np.abs(np.arctan2(xi[:, 1], xi[:, 0]))
    band = (th <= math.pi / 8) & (np.hypot(*xi.T) >= 1) & (np.hypot(*xi.T) <= 2)
    assert np.all(a[band] == 1.0)


def test_energy_minor_and_complementarity(dom):
    spec = FamilySpec(period=64.0, grid_points=256, atoms=40, min_margin=0.3)
    rng = np.random.default_rng(11)
    for _ in range(5):
        w = random_wave(spec, rng)
        D = Disk(tuple(rng.uniform(0, 64, 2)), float(rng.uniform(-3, 3)), 16.0)
        a, b = project_disk_pair(w, D)
        E = energy(w)
        assert energy(a) <= E and energy(b) <= E
        for p in (a, b):
            assert (p.color, p.k, p.hilbert_dim) == (w.color, w.k, w.hilbert_dim)
        # the random family has a(xi) = 1 on its support: the two parts add back to phi
        s = a + b
        P = rng.uniform(0, 64, (200, 3))
        from conewave.waves import evaluate
        assert np.max(np.abs(evaluate(s, P) - evaluate(w, P))) <= 1e-12 * math.sqrt(E)


def test_projection_of_whole_torus_effective_support():
    # the cutoff at the centre is the mass of eta_rho inside radius r, and
    # r / rho = r**(1/4) grows slowly: 0.999 needs r near 100
    huge = TorusDomain(2, 512.0, 256)
    phi = wave_packet(huge, "red", 0, (1.5, 0.0), 0.02, x0=(256.0, 256.0))
    inside = project_disk(phi, Disk((256.0, 256.0), 0.0, 96.0))
    assert energy(inside) / energy(phi) >= 0.999


@pytest.mark.parametrize("r", [8.0, 16.0])
def test_local_energy_slack(dom, r):
    phi = wave_packet(dom, "red", 0, (1.5, 0.0), 0.04, x0=(32.0, 32.0))
    rep = cutoff_report(phi, Disk((32.0, 32.0), 0.0, r))
    assert rep.local_energy_slack <= 1e-3


def test_local_energy_slack_against_grid_quadrature(dom):
    phi = wave_packet(dom, "red", 0, (1.5, 0.0), 0.04, x0=(30.0, 33.0))
    D = Disk((32.0, 32.0), 0.0, 12.0)
    rep = cutoff_report(phi, D)
    # ||phi||^2 over D_+ by grid quadrature instead of the exact pair sum
    M = 512
    h = 64.0 / M
    x = np.arange(M) * h
    X = np.stack(np.meshgrid(x, x, indexing="ij"), -1)
    v = np.abs(sample_slice(phi, 0.0, M)[0]) ** 2
    inside = np.linalg.norm(X - 32.0, axis=-1) <= rep.r_plus
    q = float(np.sum(v[inside])) * h * h
    Ein = rep.energy_ratio_inside * rep.energy
    assert (Ein - q) / rep.energy == pytest.approx(rep.local_energy_slack, abs=2e-3)
    assert disk_l2_squared(phi, Disk((32.0, 32.0), 0.0, rep.r_plus)) == pytest.approx(q, rel=2e-2)


def test_concentrated_packet_vanishes_off_disk(dom):
    phi = wave_packet(dom, "red", 0, (1.5, 0.0), 0.04, x0=(32.0, 32.0))
    rep = cutoff_report(phi, Disk((32.0, 32.0), 0.0, 16.0))
    assert rep.essential_vanish <= 1e-2


def test_plane_wave_energy_matches_squared_cutoff_mass(dom):
    w = plane_wave(dom, "red", 0, (1.5, 0.0))
    for r in (8.0, 16.0):
        D = Disk((32.0, 32.0), 0.0, r)
        got = energy(project_disk(w, D)) / energy(w)
        prof = make_cutoff(D, dom).profile(256)
        expect = float(np.sum(prof ** 2)) * (64.0 / 256) ** 2 / 64.0 ** 2
        assert got == pytest.approx(expect, rel=1e-9)


@pytest.mark.xfail(strict=True, reason="the r^(3/4) smoothing keeps the squared cutoff mass "
                   "near 0.6 of |D| at torus-sized radii; factor 1.2 needs r near 1000")
@pytest.mark.parametrize("r", [8.0, 16.0])
def test_plane_wave_energy_within_1_2_of_disk_volume(dom, r):
    w = plane_wave(dom, "red", 0, (1.5, 0.0))
    D = Disk((32.0, 32.0), 0.0, r)
    ratio = energy(project_disk(w, D)) / (math.pi * r * r / 64.0 ** 2)
    assert 1 / 1.2 <= ratio <= 1.2


def test_zero_wave_report(dom):
    rep = cutoff_report(zero_wave(dom), Disk((32.0, 32.0), 0.0, 8.0))
    for key in ("energy", "energy_ratio_inside", "energy_ratio_outside", "essential_concentration",
                "essential_vanish", "local_energy_slack", "nonlocal_energy_slack"):
        assert getattr(rep, key) == 0.0


def test_preconditions(dom):
    phi = wave_packet(dom, "red", 0, (1.5, 0.0), 0.04, x0=(32.0, 32.0))
    with pytest.raises(DiskTooSmall):
        project_disk(phi, Disk((32.0, 32.0), 0.0, 1.0))
    edge = plane_wave(dom, "red", 0, (1.0 + 1 / 64, 0.0))
    with pytest.raises(MarginTooSmall):
        project_disk(edge, Disk((32.0, 32.0), 0.0, 8.0))
    with pytest.raises(RegionExceedsTorus):
        project_disk(phi, Disk((32.0, 32.0), 0.0, 30.0))


def test_ceilings_flag(dom):
    phi = wave_packet(dom, "red", 0, (1.5, 0.0), 0.04, x0=(32.0, 32.0))
    rep = cutoff_report(phi, Disk((32.0, 32.0), 0.0, 8.0), ceilings={"energy_ratio_inside": 0.1})
    assert rep.flags == ["energy_ratio_inside"]


def test_idempotence_up_to_tail_mass():
    big = TorusDomain(2, 128.0, 256)
    phi = wave_packet(big, "red", 0, (1.5, 0.0), 0.04, x0=(60.0, 62.0))
    D = Disk((64.0, 64.0), 0.0, 24.0)
    once = project_disk(phi, D)
    twice = project_disk(once, D)
    tail = make_cutoff(D, big).tail_mass
    assert abs(energy(twice) - energy(once)) <= 3 * tail * energy(phi)


@pytest.fixture(scope="module")
def huygens_pair():
    big = TorusDomain(2, 128.0, 256)
    phi = wave_packet(big, "red", 0, (1.5, 0.0), 0.04, x0=(64.0, 64.0))
    psi = wave_packet(big, "blue", 0, (1.5, 0.0), 0.1, x0=(64.0, 64.0), min_margin=0.35)
    return big, phi, psi


def test_finite_speed(huygens_pair):
    big, phi, psi = huygens_pair
    rep = huygens_report(phi, psi, Disk((64.0, 64.0), 0.0, 16.0), 32.0)
    assert rep.finite_speed <= 0.05


def test_huygens_decreases_in_R(huygens_pair):
    big, phi, psi = huygens_pair
    soft = DeskConstants(**{**DESK.as_dict(), "inflation": 1.0})
    reps = [huygens_report(phi, psi, Disk((64.0, 64.0), 0.0, 12.0), R, soft) for R in (32.0, 64.0)]
    assert reps[1].huygens <= 1.1 * reps[0].huygens
    assert max(max(r.huygens, r.annulus, r.finite_speed) for r in reps) <= 0.05


def test_huygens_zero_psi_and_torus_guard(huygens_pair):
    big, phi, psi = huygens_pair
    rep = huygens_report(phi, zero_wave(big, "blue"), Disk((64.0, 64.0), 0.0, 16.0), 32.0)
    assert rep.finite_speed == rep.huygens == rep.annulus == 0.0
    with pytest.raises(RegionExceedsTorus):
        huygens_report(phi, psi, Disk((64.0, 64.0), 0.0, 16.0), 256.0)


def _kernel_band_ratio(t):
    dom = TorusDomain(2, 64.0, 256)
    K = np.abs(propagation_kernel(t, dom, 256))
    x = np.arange(256) * 0.25
    X = np.stack(np.meshgrid(x, x, indexing="ij"), -1)
    Y = (X + 32) % 64 - 32
    d = cone_distance("red", (0.0, 0.0, 0.0), Y, t)
    near, far = (K[(d > a - 0.25) & (d < a + 0.25)].max() for a in (2.0, 8.0))
    return near / far


@pytest.mark.parametrize("t", [8.0, 16.0])
def test_kernel_decays_off_cone(t):
    assert _kernel_band_ratio(t) >= 20.0


@pytest.mark.xfail(strict=True, reason="a C-infinity ramp over a unit band gap decays too slowly "
                   "at distances 2..8 on a 64-periodic grid; measured factor is 30 to 50")
@pytest.mark.parametrize("t", [8.0, 16.0])
def test_kernel_decay_factor_1e3(t):
    assert _kernel_band_ratio(t) >= 1e3
