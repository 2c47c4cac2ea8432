"""The acceptance suite: ten property and slope-window checks.

Every criterion is a function ``seed -> CriterionResult``; randomness comes from
:func:`conewave.families.make_rng` keyed by the criterion name, so results do not
depend on scheduling.  :func:`run_acceptance` runs a selection on a thread pool
and returns the results in criterion order.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np

from .bilinear import (
    cone_energy_norms, fit_slope, k_scaling_experiment, low_dispersion_l2_check,
    surface_convolution_oracle,
)
from .constants import DESK, DeskConstants
from .families import FamilySpec, make_rng, random_wave, random_wave_family
from .geometry import Cube, Disk, interior_set, monte_carlo_fraction, x_set
from .localization import cutoff_report, huygens_report, project_disk_pair
from .nullform import (
    ExponentTuple, Spectrum, apply_multiplier, check_exponent_conditions,
    commutation_residual, toy_scan,
)
from .packets import bessel_check, tube_decompose
from .waves import TorusDomain, energy, sample_slice, wave_packet

__all__ = ["CriterionResult", "CRITERIA", "run_acceptance"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    target: str
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return (f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: "
                f"{vals} (target {self.target}; {self.seconds:.1f}s)")

    def as_dict(self) -> dict:
        return asdict(self)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def energy_conservation(seed: int = 0, waves: int = 200) -> CriterionResult:
    spec = FamilySpec(period=64.0, grid_points=128, atoms=50)
    worst = 0.0
    for i in range(waves):
        rng = make_rng(seed, "energy", i)
        w = random_wave(FamilySpec(**{**spec.as_dict(), "color": ("red", "blue")[i % 2],
                                      "k": i % 2}), rng)
        E = energy(w)
        M = 256 if w.k else 128
        h = w.period / M
        for t in rng.uniform(-100.0, 100.0, 3):
            v = sample_slice(w, float(t), M)
            q = float(np.sum(v.real ** 2 + v.imag ** 2)) * h ** w.n
            worst = max(worst, abs(q - E) / E)
    return CriterionResult(1, "energy conservation", worst <= 1e-10, "rel err <= 1e-10",
                           {"max_rel_err": worst, "waves": waves})


def _packet_wave(period: float, M: int, seed: int, tag: str):
    rng = make_rng(seed, tag)
    dom = TorusDomain(2, period, M)
    c = (1.5 + 0.05 * rng.normal(), 0.05 * rng.normal())
    return wave_packet(dom, "red", 0, c, 0.05, x0=tuple(rng.uniform(0, period, 2)),
                       min_margin=0.3)


def packet_reconstruction(seed: int = 0) -> CriterionResult:
    phi = _packet_wave(128.0, 256, seed, "recon")
    errs = {}
    for c in (0.05, 0.1, 0.2):
        for R in (16.0, 32.0, 64.0):
            dec = tube_decompose(phi, Cube((64.0, 64.0), 0.0, R), c)
            errs[(c, R)] = dec.reconstruction_error()
    worst = max(errs.values())
    return CriterionResult(2, "packet reconstruction", worst <= 1e-10, "max residual <= 1e-10",
                           {"max_residual": worst, "cells": len(errs)})


def bessel_constant(seed: int = 0, assignments: int = 50, rows: int = 8) -> CriterionResult:
    phi = _packet_wave(128.0, 256, seed, "bessel")
    meas = {}
    ok = True
    for c in (0.05, 0.1):
        dec = tube_decompose(phi, Cube((64.0, 64.0), 0.0, 64.0), c)
        worst = 0.0
        for a in range(assignments):
            rng = make_rng(seed, f"bessel-{c}", a)
            m = rng.random((rows, len(dec)))
            m /= m.sum(axis=0)
            worst = max(worst, bessel_check(dec, m))
        meas[f"max_ratio_c{c}"] = worst
        ok &= worst <= 1 + 10 * c
    return CriterionResult(3, "Bessel constant", ok, "ratio <= 1 + 10c", meas)


def low_dispersion(seed: int = 0, trials: int = 20) -> CriterionResult:
    rs = [4, 8, 16, 32]
    fit = low_dispersion_l2_check(rs, trials=trials, seed=seed)
    oracle = [surface_convolution_oracle(r) for r in rs]
    scaled = [v * r for v, r in zip(oracle, rs)]
    spread = max(scaled) / min(scaled)
    ok = (-0.8 <= fit.slope <= -0.2) and spread <= 4.0
    return CriterionResult(4, "low-dispersion bilinear L2", ok,
                           "slope in [-0.8, -0.2]; oracle value*r spread <= 4",
                           {"slope": fit.slope, "oracle_spread": spread,
                            "oracle_slope": fit_slope(rs, oracle).slope})


def cone_energy(seed: int = 0, waves: int = 20) -> CriterionResult:
    Rs = [8.0, 16.0, 32.0]
    spec = FamilySpec(period=128.0, grid_points=512, count=waves, atoms=50)
    fam = random_wave_family(spec, seed, "bluecone")
    norms = cone_energy_norms(fam, (64.0, 64.0, 0.0), Rs, side=128.0, dt=1.0)
    slopes = [fit_slope(Rs, row).slope for row in norms]
    worst = max(slopes)
    return CriterionResult(5, "cone energy", worst <= 0.8, "slope <= 0.8",
                           {"max_slope": worst, "mean_slope": float(np.mean(slopes))})


def k_scaling(seed: int = 0) -> CriterionResult:
    f53 = k_scaling_experiment(range(5), 5 / 3)
    f2 = k_scaling_experiment(range(5), 2.0)
    ok53 = abs(f53.slope - (-0.1)) <= 0.15
    ok2 = abs(f2.slope) <= 0.08
    return CriterionResult(6, "k-scaling", ok53 and ok2,
                           "slope(p=5/3) in -0.1 +- 0.15; |slope(p=2)| <= 0.08",
                           {"slope_p5/3": f53.slope, "slope_p2": f2.slope,
                            "expected_p5/3": 1 / (5 / 3) - 0.5})


def averaging_geometry(seed: int = 0, samples: int = 200_000) -> CriterionResult:
    Q = Cube((0.0, 0.0), 0.0, 1.0)
    ok = True
    worst_margin = math.inf
    worst_interior = 0.0
    cell = 0
    for c in (0.01, 0.02, 0.04):
        for N, C0, k in ((4, 2, 5), (8, 2, 6)):
            rng = make_rng(seed, "averaging", cell)
            cell += 1
            frac = monte_carlo_fraction(x_set(Q, c, C0, k, N), Q, samples, rng)
            bound = 1 - 4 * N * c
            worst_margin = min(worst_margin, frac - bound)
            ok &= frac >= bound
            I = interior_set(Q, c, k)
            exact = (1 - c) ** (Q.n + 1)
            ok &= I.measure_fraction() == exact
            mc = monte_carlo_fraction(I, Q, samples, rng)
            sd = math.sqrt(exact * (1 - exact) / samples)
            worst_interior = max(worst_interior, abs(mc - exact) / sd)
            ok &= abs(mc - exact) <= 5 * sd
    return CriterionResult(7, "averaging-lemma geometry", ok,
                           "fraction >= 1 - 4Nc; |I|/|Q| = (1-c)^(n+1)",
                           {"min_excess": worst_margin, "interior_mc_sigmas": worst_interior})


def _random_spectrum(rng, atoms: int = 30) -> Spectrum:
    xi = rng.normal(size=(atoms, 2)) * 2
    tau = rng.choice([-1.0, 1.0], atoms) * np.linalg.norm(rng.normal(size=(atoms, 2)) * 2, axis=1)
    amp = rng.normal(size=atoms) + 1j * rng.normal(size=atoms)
    return Spectrum(xi, tau, amp)


def _exponent_cases() -> list[tuple[dict, dict]]:
    """The three arithmetic cases with hand-computed outcomes."""
    F = Fraction
    out = []
    v = check_exponent_conditions(ExponentTuple(F(5, 3), 0, 0, F(1, 2), F(1, 2), F(1, 2)))
    out.append(({"lin": v.conditions["lin"], "lin_threshold": v.thresholds["lin"]},
                {"lin": False, "lin_threshold": F(1)}))
    v = check_exponent_conditions(ExponentTuple(2, 0, 0, F(1, 2), F(1, 2), F(1, 2)))
    out.append(({"lin_threshold": v.thresholds["lin"], "beta_minus": v.thresholds["beta_minus"]},
                {"lin_threshold": F(1, 2), "beta_minus": F(1, 4)}))
    # alpha_1 + alpha_2 + 3/2 - 2 = 1/2 balanced by beta_- = 1/2; then perturb
    bal = check_exponent_conditions(ExponentTuple(2.0, 0.0, 0.0, 0.5, 0.5, 0.5))
    per = check_exponent_conditions(ExponentTuple(2.0, 0.0, 0.0, 0.5 + 1e-12, 0.5, 0.5))
    out.append(({"balanced": bal.conditions["scaling"], "perturbed": per.conditions["scaling"]},
                {"balanced": True, "perturbed": False}))
    return out


def nullform_algebra(seed: int = 0, spectra: int = 20) -> CriterionResult:
    box_err = 0.0
    comm = 0.0
    for i in range(spectra):
        s = _random_spectrum(make_rng(seed, "nullform", i))
        a = apply_multiplier(s, "Box", 1.0).amp
        b = apply_multiplier(apply_multiplier(s, "Dminus", 1.0), "Dplus", 1.0).amp
        box_err = max(box_err, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
        for l in (1, 2):
            comm = max(comm, commutation_residual(s, l))
    cases = _exponent_cases()
    exact = all(got == want for got, want in cases)
    ok = box_err <= 1e-12 and comm <= 1e-10 and exact
    return CriterionResult(8, "null-form algebra", ok,
                           "Box = D+D- to 1e-12; commutation <= 1e-10; exponent cases exact",
                           {"box_rel_err": box_err, "commutation": comm, "exponent_cases": exact})


def toy_bound(seed: int = 0) -> CriterionResult:
    vals = toy_scan()
    base = vals[(0, 0)]
    worst = max(v / base for v in vals.values())
    return CriterionResult(9, "toy bound shape", worst <= 8.0, "max/(0,0) <= 8",
                           {"max_over_base": worst, "base": base})


def localization(seed: int = 0, waves: int = 8) -> CriterionResult:
    dom = TorusDomain(2, 64.0, 256)
    spec = FamilySpec(period=64.0, grid_points=256, atoms=40, min_margin=0.3)
    minor = -math.inf
    for i in range(waves):
        rng = make_rng(seed, "localization", i)
        w = random_wave(spec, rng)
        D = Disk(tuple(rng.uniform(0, 64.0, 2)), float(rng.uniform(-5, 5)), 16.0)
        a, b = project_disk_pair(w, D)
        E = energy(w)
        minor = max(minor, energy(a) - E, energy(b) - E)
    slack = []
    for r in (8.0, 16.0):
        phi = wave_packet(dom, "red", 0, (1.5, 0.0), 0.04, x0=(32.0, 32.0))
        slack.append(cutoff_report(phi, Disk((32.0, 32.0), 0.0, r)).local_energy_slack)
    big = TorusDomain(2, 128.0, 256)
    phi = wave_packet(big, "red", 0, (1.5, 0.0), 0.04, x0=(64.0, 64.0))
    psi = wave_packet(big, "blue", 0, (1.5, 0.0), 0.1, x0=(64.0, 64.0), min_margin=0.35)
    fs = huygens_report(phi, psi, Disk((64.0, 64.0), 0.0, 16.0), 32.0).finite_speed
    soft = DeskConstants(**{**DESK.as_dict(), "inflation": 1.0})
    hy = [huygens_report(phi, psi, Disk((64.0, 64.0), 0.0, 12.0), R, soft) for R in (32.0, 64.0)]
    ratios = [fs] + [v for h in hy for v in (h.huygens, h.annulus)]
    decreasing = hy[1].huygens <= hy[0].huygens * 1.1
    ok = minor <= 0.0 and max(slack) <= 1e-3 and max(ratios) <= 0.05 and decreasing
    return CriterionResult(10, "localization", ok,
                           "energy-minor exact; slack <= 1e-3; Huygens ratios <= 0.05",
                           {"energy_minor_excess": minor, "max_slack": max(slack),
                            "finite_speed": fs, "max_huygens_ratio": max(ratios[1:]),
                            "huygens_R": [h.huygens for h in hy]})


CRITERIA = {
    1: energy_conservation,
    2: packet_reconstruction,
    3: bessel_constant,
    4: low_dispersion,
    5: cone_energy,
    6: k_scaling,
    7: averaging_geometry,
    8: nullform_algebra,
    9: toy_bound,
    10: localization,
}


def _timed(num: int, seed: int) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[num](seed)
    res.seconds = time.perf_counter() - t0
    return res


def run_acceptance(select=None, seed: int = 0, threads: int = 1) -> list[CriterionResult]:
    """Run the selected criteria (default all) and return results in criterion order."""
    nums = sorted(select or CRITERIA)
    unknown = [k for k in nums if k not in CRITERIA]
    if unknown:
        raise KeyError(f"unknown criteria {unknown}")
    if threads <= 1:
        return [_timed(k, seed) for k in nums]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda k: _timed(k, seed), nums))
