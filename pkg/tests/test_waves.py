import math

import numpy as np
import pytest

from conewave.errors import AtomOutsideSector, EmptyWave, OffLattice
from conewave.families import FamilySpec, random_wave
from conewave.waves import (
    SECTOR_ANGLE, Color, FrequencyAtom, TorusDomain, Wave, angular_dispersion, dilate,
    energy, evaluate, make_wave, margin, plane_wave, sample_slice, sector_lattice, tensor,
    time_reverse, wave_from_indices, zero_wave,
)


def _random(dom, rng, atoms=20, color="red", k=0, H=1):
    spec = FamilySpec(dom.n, dom.period, dom.grid_points, color, k, 1, atoms, hilbert_dim=H)
    return random_wave(spec, rng)


def test_make_wave_validation(dom64):
    w = make_wave(dom64, "red", 0, 1, [FrequencyAtom((1.5, 0.0), [1.0])])
    assert w.n_atoms == 1
    with pytest.raises(AtomOutsideSector):
        make_wave(dom64, "red", 0, 1, [((0.0, 1.5), [1.0])])
    with pytest.raises(AtomOutsideSector):
        make_wave(dom64, "red", 0, 1, [((3.0, 0.0), [1.0])])
    with pytest.raises(OffLattice):
        make_wave(dom64, "red", 0, 1, [((1.5 + 1e-3, 0.0), [1.0])])
    with pytest.raises(ValueError):
        make_wave(dom64, "red", 0, 2, [((1.5, 0.0), [1.0])])


def test_domain_invariants():
    with pytest.raises(ValueError):
        TorusDomain(2, 64.0, 100)
    with pytest.raises(ValueError):
        TorusDomain(1, 64.0, 128)
    with pytest.raises(ValueError):
        TorusDomain(2, -1.0, 128)


def test_plane_wave_is_unimodular(dom64, rng):
    w = plane_wave(dom64, "red", 0, (1.5, 0.0))
    P = rng.uniform(-50, 50, (200, 3))
    np.testing.assert_allclose(np.abs(evaluate(w, P)[:, 0]), 1.0, atol=1e-12)
    assert np.all(evaluate(zero_wave(dom64), P) == 0)


def test_evaluate_matches_direct_sum(dom64, rng):
    w = _random(dom64, rng, atoms=2)
    P = rng.uniform(-40, 40, (100, 3))
    ref = np.zeros(100, dtype=complex)
    for xi, a, tau in zip(w.xi, w.amp[:, 0], w.tau):
        ref += a * np.exp(2j * np.pi * (P[:, :2] @ xi + P[:, 2] * tau))
    got = evaluate(w, P)[:, 0]
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) <= 1e-12


def test_blue_has_negative_temporal_frequency(dom64):
    w = plane_wave(dom64, "blue", 0, (1.5, 0.0))
    assert w.tau[0] == pytest.approx(-1.5)
    # a blue plane wave is constant along x_1 - t = const
    P = np.array([[0.0, 0.0, 0.0], [0.7, 0.0, 0.7]])
    v = evaluate(w, P)[:, 0]
    assert abs(v[0] - v[1]) < 1e-12


def test_energy_closed_form():
    d = TorusDomain(2, 1.0, 16)
    w = make_wave(d, "red", 0, 1, [((1.0, 0.0), [3 + 4j])])
    assert energy(w) == 25.0
    assert energy(zero_wave(d)) == 0.0


def test_energy_matches_quadrature_at_several_times(dom64, rng):
    w = _random(dom64, rng)
    h = dom64.period / dom64.grid_points
    for t in (0.0, 1.7, -3.2):
        v = sample_slice(w, t)
        q = float(np.sum(np.abs(v) ** 2)) * h ** 2
        assert abs(q - energy(w)) / energy(w) <= 1e-10


def test_linearity(dom64, rng):
    a, b = _random(dom64, rng), _random(dom64, rng)
    P = rng.uniform(0, 64, (100, 3))
    lhs = evaluate(a * (2 - 1j) + b * 0.5, P)
    rhs = (2 - 1j) * evaluate(a, P) + 0.5 * evaluate(b, P)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_tensor_energy(dom64, rng):
    a = _random(dom64, rng, H=2)
    b = _random(dom64, rng, color="blue", H=3)
    T = tensor(a, b)
    e = float(np.sum(np.abs(T) ** 2)) * dom64.period ** 4
    assert e == pytest.approx(energy(a) * energy(b), rel=1e-12)


def _brute_margin(xi, k, m=400_001):
    """Distance from (xi, |xi|)/2^k to dense samples of the boundary of the sector on the cone.

    For a point inside the sector the nearest point of the complement lies on
    the boundary: the circles of radius 1 and 2 and the two edge rays.
    """
    p = np.append(xi, np.linalg.norm(xi)) / 2.0 ** k
    th = np.linspace(-np.pi, np.pi, m)
    rad = np.linspace(0.0, 6.0, m)
    pts = [np.stack([b * np.cos(th), b * np.sin(th), np.full(m, b)], 1) for b in (1.0, 2.0)]
    for e in (SECTOR_ANGLE, -SECTOR_ANGLE):
        pts.append(np.stack([rad * math.cos(e), rad * math.sin(e), rad], 1))
    return float(min(np.min(np.linalg.norm(q - p, axis=1)) for q in pts))


def test_margin_against_dense_boundary_sampling(dom64):
    w = plane_wave(dom64, "red", 0, (1.5, 0.0))
    assert margin(w) == pytest.approx(_brute_margin(np.array([1.5, 0.0]), 0), abs=1e-4)
    xi = np.array([80.0, 10.0]) / 64
    w = plane_wave(dom64, "red", 0, xi)
    assert margin(w) == pytest.approx(_brute_margin(xi, 0), abs=1e-4)


def test_margin_zero_on_boundary_and_scale_invariant(dom64):
    # a lattice point at the angular edge: choose the closest to angle pi/8
    idx = sector_lattice(dom64, 0)
    ang = np.abs(np.arctan2(idx[:, 1], idx[:, 0]))
    edge = idx[np.argmax(ang)]
    w = wave_from_indices(dom64, "red", 0, [edge], [1.0])
    assert margin(w) <= 2e-2  # nearest lattice point to the edge
    w2 = plane_wave(dom64, "red", 0, (1.25, 0.25))
    assert margin(dilate(w2, 2)) == margin(w2)
    with pytest.raises(EmptyWave):
        margin(zero_wave(dom64))


def test_angular_dispersion(dom64, rng):
    w = plane_wave(dom64, "red", 0, (1.5, 0.0))
    assert angular_dispersion(w) == 0.0
    idx = np.array([[96, 10], [96, -10]])
    w = wave_from_indices(dom64, "red", 0, idx, [1.0, 1.0])
    th = math.atan2(10, 96)
    assert angular_dispersion(w) == pytest.approx(2 * math.sin(th), abs=1e-15)
    w = _random(dom64, rng, atoms=50)
    u = w.xi / np.linalg.norm(w.xi, axis=1, keepdims=True)
    brute = np.max(np.linalg.norm(u[:, None] - u[None], axis=2))
    assert angular_dispersion(w) == pytest.approx(brute, abs=1e-12)


def test_dilation_and_time_reversal(dom64, rng):
    w = _random(dom64, rng)
    for j in (1, 2):
        d = dilate(w, j)
        assert d.k == w.k + j
        assert energy(d) == pytest.approx(energy(w) * 2.0 ** (-j * w.n), rel=1e-14)
        # D_j phi(x, t) = phi(2^j x, 2^j t)
        P = rng.uniform(0, 10, (20, 3))
        np.testing.assert_allclose(evaluate(d, P), evaluate(w, P * 2.0 ** j), atol=1e-9)
    r = time_reverse(w)
    assert r.color is Color.BLUE
    assert energy(r) == energy(w) and margin(r) == margin(w)
    rr = time_reverse(r)
    assert np.array_equal(rr.index, w.index) and np.array_equal(rr.amp, w.amp)
    assert sorted(np.abs(r.amp[:, 0])) == sorted(np.abs(w.amp[:, 0]))
    P = rng.uniform(0, 64, (20, 3))
    Q = P * np.array([1, 1, -1])
    np.testing.assert_allclose(evaluate(r, P), evaluate(w, Q), atol=1e-10)


def test_dilation_off_lattice(dom64):
    w = wave_from_indices(dom64, "red", 1, [[129, 0]], [1.0])
    with pytest.raises(OffLattice):
        dilate(w, -1, keep_period=True)


def test_json_round_trip_is_bit_exact(dom64, rng):
    w = _random(dom64, rng, H=2)
    back = Wave.from_json(w.to_json())
    assert back.domain == w.domain and back.color == w.color and back.k == w.k
    assert np.array_equal(back.index, w.index)
    assert np.array_equal(back.amp, w.amp)


def test_energy_time_invariance_large_times(dom64, rng):
    w = _random(dom64, rng, color="blue", k=1)
    h = dom64.period / 256
    e = [float(np.sum(np.abs(sample_slice(w, t, 256)) ** 2)) * h * h for t in (0.0, 1e3)]
    assert e[0] == pytest.approx(e[1], rel=1e-10)


def _cube_l2_squared(w, center, t0, R):
    """Closed-form integral of |phi|^2 over a cube: pairwise sinc products."""
    fr = np.concatenate([w.xi, w.tau[:, None]], 1)
    d = fr[:, None, :] - fr[None, :, :]
    c = np.append(center, t0)
    G = np.prod(R * np.sinc(R * d) * np.exp(2j * np.pi * d * c), axis=2)
    return float(np.real(np.einsum("jh,lh,jl->", w.amp, w.amp.conj(), G)))


def test_cube_l2_oracle_matches_quadrature():
    from conewave.geometry import Cube, torus_quadrature
    from conewave.waves import magnitude_slice
    w = random_wave(FamilySpec(2, 64.0, 128, atoms=20), np.random.default_rng(1))
    q = torus_quadrature(Cube((20.0, 30.0), 1.0, 8.0),
                         lambda t: magnitude_slice(w, t) ** 2, 64.0, 128, 0.25)
    assert q.value == pytest.approx(_cube_l2_squared(w, np.array([20.0, 30.0]), 1.0, 8.0), rel=5e-3)


def test_l2_triv_scaling():
    spec = FamilySpec(2, 64.0, 128, atoms=20)
    cubes = np.random.default_rng(5)

    def ratios(seed0, count):
        out = []
        for s in range(count):
            w = random_wave(spec, np.random.default_rng(seed0 + s))
            for R in (4.0, 8.0, 16.0):
                c, t = cubes.uniform(0, 64, 2), cubes.uniform(-10, 10)
                out.append(math.sqrt(_cube_l2_squared(w, c, t, R) / (R * energy(w))))
        return np.array(out)

    C = ratios(1000, 50).max()
    assert ratios(5000, 200).max() <= 1.05 * C
