import math

import pytest

from conewave.bilinear import (
    cone_energy_check, doublecone_l1_check, empirical_A_ratio, extremizer_pair, fit_slope,
    k_scaling_experiment, product_lp_norm, quilt_product_l1, surface_convolution_oracle,
)
from conewave.errors import EnergyNotNormalized, GridTooCoarse
from conewave.families import FamilySpec, random_wave_family
from conewave.geometry import Cube
from conewave.packets import build_wave_table
from conewave.waves import TorusDomain, energy, normalized, wave_from_indices, wave_packet, zero_wave


@pytest.fixture(scope="module")
def dom():
    return TorusDomain(2, 64.0, 128)


@pytest.fixture(scope="module")
def pair(dom):
    phi = normalized(wave_packet(dom, "red", 0, (1.5, 0.0), 0.05, x0=(32, 32), min_margin=0.3))
    psi = normalized(wave_packet(dom, "blue", 0, (1.5, 0.0), 0.06, x0=(32, 32), min_margin=0.3))
    return phi, psi


@pytest.mark.parametrize("p", [1.0, 1.5, 5 / 3, 2.0])
def test_single_atoms_closed_form(dom, p):
    # |phi psi| is the constant |a b|, so the norm is |a b| |Q|^(1/p)
    phi = wave_from_indices(dom, "red", 0, [[96, 0]], [0.7])
    psi = wave_from_indices(dom, "blue", 0, [[90, 10]], [1.3j])
    Q = Cube((32.0, 32.0), 0.0, 8.0)
    rep = product_lp_norm(phi, psi, Q, p)
    assert rep.value == pytest.approx(0.91 * 512 ** (1 / p), rel=1e-12)


def test_p_outside_range(pair):
    with pytest.raises(ValueError):
        product_lp_norm(*pair, Cube((32.0, 32.0), 0.0, 8.0), 2.5)


def test_holder_and_unlocalized_l1():
    dom = TorusDomain(2, 64.0, 128)
    fam = random_wave_family(FamilySpec(period=64.0, grid_points=128, count=3, atoms=30,
                                        min_margin=0.2), 3, "holder")
    blue = normalized(wave_packet(dom, "blue", 0, (1.5, 0.0), 0.06, x0=(30, 30), min_margin=0.3))
    R = 16.0
    Q = Cube((32.0, 32.0), 0.0, R)
    for w in fam:
        l1 = product_lp_norm(w, blue, Q, 1.0).value
        a = product_lp_norm(w, w, Q, 1.0).value
        b = product_lp_norm(blue, blue, Q, 1.0).value
        assert l1 <= math.sqrt(a * b) * (1 + 1e-9)
        assert l1 <= 4.0 * R * math.sqrt(energy(w) * energy(blue))


def test_fit_slope():
    x = [2.0, 4.0, 8.0, 16.0]
    fit = fit_slope(x, [3 * v ** -0.5 for v in x])
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.residual <= 1e-12
    assert fit_slope(x, [1.0, 0.0, 1.0, 1.0]).skipped
    with pytest.raises(ValueError):
        fit_slope([1.0, 2.0], [1.0, 2.0])


def test_cone_energy(dom):
    z = cone_energy_check(zero_wave(dom, "red", 0), (32.0, 32.0, 0.0), [4.0, 8.0, 16.0])
    assert z.skipped and math.isnan(z.slope)
    fam = random_wave_family(FamilySpec(period=64.0, grid_points=128, count=3, atoms=30), 0, "cone")
    for w in fam:
        fit = cone_energy_check(w, (32.0, 32.0, 0.0), [4.0, 8.0, 16.0], side=64.0)
        assert not fit.skipped
        assert fit.slope <= 0.8


def test_doublecone_ratio(pair):
    vals = []
    for r in (2.0, 4.0, 8.0):
        rep, ratio = doublecone_l1_check(*pair, (32.0, 32.0, 0.0), r, Cube((32.0, 32.0), 0.0, 32.0))
        assert rep.value > 0
        vals.append(ratio)
    assert max(vals) <= 1.0
    # the norm saturates once the cone holds the interaction, so the ratio falls with r
    assert vals[0] > vals[1] > vals[2]


def test_surface_oracle_scaling():
    rs = (4, 8, 16, 32)
    vals = [surface_convolution_oracle(r) for r in rs]
    scaled = [v * r for v, r in zip(vals, rs)]
    assert max(scaled) / min(scaled) <= 4.0
    assert fit_slope(rs, vals).slope == pytest.approx(-1.0, abs=0.1)
    assert surface_convolution_oracle(4, zeta_window=((10, 10), (12, 12)), zeta_grid=5) == 0.0


def test_k_scaling_follows_lp_exponent():
    # the extremizer family grows like 2^(k (1/p - 1/2))
    fit = k_scaling_experiment(range(5), 5 / 3)
    assert fit.slope == pytest.approx(1 / (5 / 3) - 0.5, abs=0.05)
    assert abs(k_scaling_experiment(range(5), 2.0).slope) <= 0.08


def test_extremizer_limits():
    with pytest.raises(GridTooCoarse):
        extremizer_pair(5)
    phi, psi, times = extremizer_pair(2)
    assert phi.amp.shape[1] == 4 == len(times)
    assert energy(phi) == pytest.approx(1.0) and energy(psi) == pytest.approx(1.0)


def test_empirical_A_ratio(dom):
    reds = random_wave_family(FamilySpec(period=64.0, grid_points=128, count=2, atoms=20), 1, "ar")
    blues = random_wave_family(FamilySpec(period=64.0, grid_points=128, color="blue", count=2,
                                          atoms=20), 1, "ab")
    fam = list(zip(reds, blues))
    vals = [empirical_A_ratio(fam, Cube((32.0, 32.0), 0.0, R), 5 / 3).value for R in (4.0, 8.0, 16.0)]
    assert vals[0] <= vals[1] <= vals[2]
    again = empirical_A_ratio(fam, Cube((32.0, 32.0), 0.0, 4.0), 5 / 3)
    assert again.value == vals[0]
    with pytest.raises(EnergyNotNormalized):
        empirical_A_ratio([(reds[0] * 2.0, blues[0])], Cube((32.0, 32.0), 0.0, 4.0), 5 / 3)


def test_quilt_gain():
    d = TorusDomain(2, 64.0, 256)
    phi = normalized(wave_packet(d, "red", 0, (1.5, 0.05), 0.05, x0=(34, 30), min_margin=0.3))
    psi = normalized(wave_packet(d, "blue", 0, (1.5, 0.0), 0.08, x0=(30, 32), t0=2, min_margin=0.35))
    tab, _ = build_wave_table(phi, psi, Cube((32.0, 32.0), 0.0, 16.0), 0.1, depth=3, step=1.0)
    g0 = quilt_product_l1(tab, 0, psi, grid_points=128)
    g3 = quilt_product_l1(tab, 3, psi, grid_points=128)
    assert g3 <= 0.7 * g0
