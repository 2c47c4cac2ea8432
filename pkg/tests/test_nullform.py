import math
from fractions import Fraction

import numpy as np
import pytest

from conewave.errors import MixedDomains, NegativeL, SingularSymbol
from conewave.families import FamilySpec, random_wave
from conewave.nullform import (
    ExponentTuple, Spectrum, apply_multiplier, check_exponent_conditions, commutation_residual,
    lorentz_energy, lorentz_jacobian, lorentz_matrix, lorentz_rescale, product_spectrum,
    sector_dyadic_split, symbol_values, toy_pair, toy_scan,
)
from conewave.waves import TorusDomain, energy, evaluate, plane_wave, wave_from_indices, zero_wave


def _random_spectrum(rng, atoms=30):
    xi = rng.normal(size=(atoms, 2)) * 2
    tau = rng.choice([-1.0, 1.0], atoms) * np.linalg.norm(rng.normal(size=(atoms, 2)) * 2, axis=1)
    return Spectrum(xi, tau, rng.normal(size=atoms) + 1j * rng.normal(size=atoms))


@pytest.fixture
def unit_dom():
    return TorusDomain(2, 1.0, 16)


def test_single_joint_atom(unit_dom):
    phi = plane_wave(unit_dom, "red", 0, (1.0, 0.0))
    psi = plane_wave(unit_dom, "blue", 0, (1.0, 0.0))
    s = product_spectrum(phi, psi)
    assert len(s) == 1
    assert np.array_equal(s.xi[0], [2.0, 0.0]) and s.tau[0] == 0.0
    for name, val in (("D0", 2.0), ("Dplus", 2.0), ("Dminus", 2.0), ("Box", 4.0)):
        assert symbol_values(s, name)[0] == val
    assert apply_multiplier(s, "Box", 1.0).amp[0, 0] == 4 * s.amp[0, 0]


def test_empty_factor_and_mixed_domains(unit_dom):
    phi = plane_wave(unit_dom, "red", 0, (1.0, 0.0))
    assert len(product_spectrum(phi, zero_wave(unit_dom, "blue"))) == 0
    other = plane_wave(TorusDomain(2, 2.0, 16), "blue", 0, (1.0, 0.0))
    with pytest.raises(MixedDomains):
        product_spectrum(phi, other)


def test_product_spectrum_matches_pointwise_product(rng):
    dom = TorusDomain(2, 64.0, 128)
    phi = random_wave(FamilySpec(atoms=5), rng)
    psi = random_wave(FamilySpec(color="blue", k=1, atoms=7, hilbert_dim=2), rng)
    s = product_spectrum(phi, psi)
    assert len(s) == 35 and s.amp.shape[1] == 2
    P = rng.uniform(-50, 50, (100, 3))
    direct = evaluate(phi, P)[:, :, None] * evaluate(psi, P)[:, None, :]
    got = s.evaluate(P)
    assert np.max(np.abs(got - direct.reshape(100, -1))) <= 1e-12 * np.max(np.abs(direct))
    conj = product_spectrum(phi, psi, conjugate=True).evaluate(P)
    direct = evaluate(phi, P)[:, :, None] * evaluate(psi, P).conj()[:, None, :]
    assert np.max(np.abs(conj - direct.reshape(100, -1))) <= 1e-12 * np.max(np.abs(direct))
    assert dom.period == s.period


def test_coalesce_merges_equal_frequencies(unit_dom):
    phi = wave_from_indices(unit_dom, "red", 0, [[1, 0], [2, 0]], [1.0, 2.0])
    psi = wave_from_indices(unit_dom, "red", 0, [[1, 0], [2, 0]], [1.0, 1.0])
    s = product_spectrum(phi, psi).coalesce()
    assert len(s) == 3
    a = dict(zip(s.xi[:, 0], s.amp[:, 0]))
    assert a[3.0] == 3.0 and a[2.0] == 1.0 and a[4.0] == 2.0


def test_multiplier_algebra(rng):
    s = _random_spectrum(rng)
    assert np.array_equal(apply_multiplier(s, "Dplus", 0).amp, s.amp)
    two = apply_multiplier(apply_multiplier(s, "Dplus", 0.3), "Dplus", 0.45)
    one = apply_multiplier(s, "Dplus", 0.75)
    assert np.max(np.abs(two.amp - one.amp)) <= 1e-12 * np.max(np.abs(one.amp))
    box = apply_multiplier(s, "Box", 1.0).amp
    pm = apply_multiplier(apply_multiplier(s, "Dminus", 1.0), "Dplus", 1.0).amp
    assert np.max(np.abs(box - pm) / np.abs(box)) <= 1e-12
    d0, dp, dm = (symbol_values(s, k) for k in ("D0", "Dplus", "Dminus"))
    assert np.all(d0 >= 0) and np.all(dm >= 0)
    assert np.all(dp >= d0) and np.all(dp >= np.abs(s.tau))
    c = apply_multiplier(s, "D0", 0.5 + 2.0j)
    np.testing.assert_allclose(np.abs(c.amp[:, 0]), np.abs(s.amp[:, 0]) * d0 ** 0.5, rtol=1e-12)
    with pytest.raises(ValueError):
        apply_multiplier(s, "Laplace", 1.0)


def test_negative_power_on_null_interaction(unit_dom):
    phi = plane_wave(unit_dom, "red", 0, (1.0, 0.0))
    s = product_spectrum(phi, phi)            # parallel red waves: tau = |xi|, D- = 0
    assert symbol_values(s, "Dminus")[0] == 0.0
    with pytest.raises(SingularSymbol):
        apply_multiplier(s, "Dminus", -0.5)
    assert apply_multiplier(s, "Dminus", 0.5).amp[0, 0] == 0.0


def test_lorentz_map(rng):
    s = _random_spectrum(rng)
    same = lorentz_rescale(s, 0)
    assert np.array_equal(same.xi, s.xi) and np.array_equal(same.tau, s.tau)
    w = plane_wave(TorusDomain(2, 8.0, 16), "red", 0, (1.5, 0.0))
    assert lorentz_rescale(w, 0) is w
    with pytest.raises(ValueError):
        lorentz_rescale(w, 1)
    with pytest.raises(NegativeL):
        lorentz_rescale(s, -1)
    with pytest.raises(NegativeL):
        lorentz_matrix(-2, 2)
    # a forward null atom along e_1 is fixed
    for l in (1, 2, 3):
        img = lorentz_rescale(Spectrum([[1.7, 0.0]], [1.7], [1.0]), l)
        assert img.xi[0, 0] == 1.7 and img.tau[0] == 1.7 and img.xi[0, 1] == 0.0


@pytest.mark.parametrize("l", [1, 2])
def test_commutation(rng, l):
    for _ in range(20):
        s = _random_spectrum(rng)
        assert commutation_residual(s, l) <= 1e-10
    # the constant 4**-l fails by an O(1) margin
    assert commutation_residual(_random_spectrum(rng), l, factor=4.0 ** -l) > 0.1


def test_lorentz_jacobian_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-6
    for l in (1, 2):
        A = lorentz_matrix(l, 2)
        for sign in (1, -1):
            for xi in rng.uniform(0.5, 2.0, (5, 2)):
                def f(v):
                    z = A @ np.append(v, sign * np.linalg.norm(v))
                    return z[:-1]
                J = np.column_stack([(f(xi + h * e) - f(xi - h * e)) / (2 * h) for e in np.eye(2)])
                assert lorentz_jacobian(xi, l, sign)[0] == pytest.approx(abs(np.linalg.det(J)), rel=1e-6)


@pytest.mark.parametrize("l", [0, 1, 2, 3])
def test_lorentz_energy_window(rng, l):
    w = random_wave(FamilySpec(atoms=40), rng)
    ratio = lorentz_energy(w, l) / energy(w)
    assert 2.0 ** l / 4 <= ratio <= 4 * 2.0 ** l


def test_sector_split(rng):
    dom = TorusDomain(2, 64.0, 128)
    w = random_wave(FamilySpec(atoms=60, hilbert_dim=2), rng)
    for l in (0, 1, 2, 3):
        parts = sector_dyadic_split(w, l)
        assert math.isclose(sum(energy(p) for p in parts.values()), energy(w), rel_tol=1e-12)
        idx = np.concatenate([p.index for p in parts.values()])
        assert sorted(map(tuple, idx)) == sorted(map(tuple, w.index))
        if l == 0:
            assert {k[1] for k in parts} == {0}
    # two atoms 2^(1-l) apart in angle
    l = 3
    th = np.array([-0.5, 0.5]) * 2.0 ** (1 - l) * 0.99
    idx = np.round(np.column_stack([np.cos(th), np.sin(th)]) * 1.5 * 64)
    parts = sector_dyadic_split(wave_from_indices(dom, "red", 0, idx, [1.0, 1.0]), l)
    assert len(parts) == 2
    assert sector_dyadic_split(zero_wave(dom), 2) == {}


def test_exponent_cases():
    F = Fraction
    v = check_exponent_conditions(ExponentTuple(F(5, 3), 0, 0, F(1, 2), F(1, 2), F(1, 2)))
    assert v.thresholds["lin"] == 1 and v.conditions["lin"] is False and not v.admissible
    v = check_exponent_conditions(ExponentTuple(2, 0, 0, F(1, 2), F(1, 2), F(1, 2)))
    assert v.thresholds["lin"] == F(1, 2) and v.thresholds["beta_minus"] == F(1, 4)
    assert check_exponent_conditions(ExponentTuple(2.0, 0.0, 0.0, 0.5, 0.5, 0.5)).conditions["scaling"]
    per = check_exponent_conditions(ExponentTuple(2.0, 0.0, 0.0, 0.5 + 1e-12, 0.5, 0.5))
    assert per.conditions["scaling"] is False
    assert v.thresholds["p0"] == F(5, 3)


def test_exponent_admissible_tuple():
    F = Fraction
    # p = 2: scaling needs beta sum = alpha sum - 1/2; beta_- > 1/4, beta_0 > -1/2,
    # alpha_i < beta_- + 1/2 and alpha_1 + alpha_2 > 1/2
    t = ExponentTuple(2, 0, 0, F(1, 2), F(1, 2), F(1, 2))
    v = check_exponent_conditions(t)
    assert v.conditions["scaling"] and v.admissible, v.as_dict()
    # below p_0
    v = check_exponent_conditions(ExponentTuple(F(3, 2), 0, 0, F(1, 2), F(1, 2), F(1, 2)))
    assert not v.conditions["p_range"] and not v.admissible


def test_toy_pair_supports():
    phi, psi = toy_pair(1, 1)
    assert np.all((phi.xi[:, 0] >= 1) & (phi.xi[:, 0] < 2))
    assert np.all((phi.xi[:, 1] >= 0.5) & (phi.xi[:, 1] < 1))
    np.testing.assert_allclose(phi.tau, np.linalg.norm(phi.xi, axis=1))
    assert np.all((-psi.xi[:, 0] >= 2) & (-psi.xi[:, 0] < 4))
    np.testing.assert_allclose(psi.tau, -np.linalg.norm(psi.xi, axis=1))
    assert phi.energy() == pytest.approx(1.0) and psi.energy() == pytest.approx(1.0)


def test_toy_scan_small():
    vals = toy_scan([0, 1], [0, 1], grid_points=128)
    base = vals[(0, 0)]
    assert all(0 < v / base <= 8 for v in vals.values())
