"""Deterministic random wave families.

All randomness is drawn from counter-based Philox generators keyed by
``(seed, experiment, cell)`` so that experiment cells can run in any order or
on any number of threads and still produce identical numbers.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InfeasibleSpec
from .waves import (
    Color, TorusDomain, Wave, atom_margins, normalized, sector_lattice,
    wave_from_indices,
)

__all__ = ["make_rng", "FamilySpec", "random_wave_family", "random_wave", "focused_wave"]


def make_rng(seed: int, experiment: str = "", cell: int = 0) -> np.random.Generator:
    """Philox generator keyed by the seed, the experiment name and the cell index."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(experiment.encode()), int(cell)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class FamilySpec:
    """Declared hypothesis class of a random wave family.

    ``dispersion`` caps the angular dispersion (the atoms are drawn from a cone
    of that aperture about a random axis in the sector); ``coherent`` replaces
    the random complex amplitudes by a smooth positive profile focused at a
    random point of the torus at ``t = 0``.
    """

    n: int = 2
    period: float = 64.0
    grid_points: int = 128
    color: str = "red"
    k: int = 0
    count: int = 1
    atoms: int = 50
    min_margin: float = 0.01
    dispersion: float | None = None
    energy: float = 1.0
    hilbert_dim: int = 1
    coherent: bool = False

    @property
    def domain(self) -> TorusDomain:
        return TorusDomain(self.n, self.period, self.grid_points)

    def as_dict(self) -> dict:
        return asdict(self)


def _candidates(spec: FamilySpec, rng: np.random.Generator) -> np.ndarray:
    dom = spec.domain
    cand = sector_lattice(dom, spec.k, spec.min_margin)
    if spec.dispersion is None:
        return cand
    # lattice angular resolution at the top of the band
    res = 1.0 / (dom.period * 2.0 ** (spec.k + 1))
    if spec.dispersion < res:
        raise InfeasibleSpec(f"dispersion {spec.dispersion:.3g} below lattice resolution {res:.3g}")
    half = 2.0 * math.asin(min(1.0, spec.dispersion / 2.0)) / 2.0
    u = cand / np.linalg.norm(cand, axis=1, keepdims=True)
    # axis drawn so that the whole aperture sits inside the sector where possible
    lim = max(0.0, math.pi / 8 - half)
    if spec.n == 2:
        th = rng.uniform(-lim, lim)
        axis = np.array([math.cos(th), math.sin(th)])
    else:
        v = rng.normal(size=spec.n)
        v[0] = 0.0
        v /= np.linalg.norm(v) or 1.0
        th = rng.uniform(0, lim)
        axis = math.cos(th) * np.eye(spec.n)[0] + math.sin(th) * v
    keep = np.arccos(np.clip(u @ axis, -1, 1)) <= half + 1e-12
    return cand[keep]


def random_wave(spec: FamilySpec, rng: np.random.Generator) -> Wave:
    """One wave of the family drawn from ``rng``."""
    dom = spec.domain
    cand = _candidates(spec, rng)
    if len(cand) < max(1, spec.atoms if not spec.coherent else 1):
        raise InfeasibleSpec(f"only {len(cand)} lattice points satisfy the constraints")
    if spec.coherent:
        idx = cand
        xi = dom.frequencies(idx)
        x0 = rng.uniform(0, dom.period, spec.n)
        # smooth positive profile: radial bump inside the band times an angular bump
        rad = np.linalg.norm(xi, axis=1) / 2.0 ** spec.k
        prof = np.sin(np.pi * np.clip(rad - 1.0, 0, 1)) ** 2
        if spec.dispersion is not None:
            u = xi / np.linalg.norm(xi, axis=1, keepdims=True)
            c = u.mean(axis=0)
            c /= np.linalg.norm(c)
            a = np.arccos(np.clip(u @ c, -1, 1))
            prof = prof * np.cos(np.pi * a / (2 * (a.max() + 1e-12) * 1.0001)) ** 2
        phase = np.exp(-2j * np.pi * (xi @ x0))
        amp = (prof * phase)[:, None] * np.ones((1, spec.hilbert_dim))
        keep = prof > 0
        w = wave_from_indices(dom, spec.color, spec.k, idx[keep], amp[keep])
    else:
        pick = rng.choice(len(cand), size=spec.atoms, replace=False)
        idx = cand[np.sort(pick)]
        amp = rng.normal(size=(spec.atoms, spec.hilbert_dim)) + 1j * rng.normal(size=(spec.atoms, spec.hilbert_dim))
        w = wave_from_indices(dom, spec.color, spec.k, idx, amp)
    return normalized(w, spec.energy)


def random_wave_family(spec: FamilySpec, seed: int, experiment: str = "family") -> list[Wave]:
    """``spec.count`` waves; wave ``i`` uses the generator keyed by cell ``i``.

    Raises
    ------
    InfeasibleSpec
        the constraints leave too few lattice points (for instance a dispersion
        target below the lattice angular resolution).
    """
    return [random_wave(spec, make_rng(seed, experiment, i)) for i in range(spec.count)]


def focused_wave(domain: TorusDomain, color, k: int, center_xi, half_width: float,
                 x0, t0: float = 0.0, hilbert_dim: int = 1, min_margin: float = 0.0) -> Wave:
    """Atoms on the lattice cube ``|xi - center|_inf <= half_width`` with a separable
    ``cos**2`` profile, phased to focus at ``(x0, t0)``."""
    color = Color(color)
    c = np.asarray(center_xi, dtype=float)
    lo = np.ceil((c - half_width) * domain.period).astype(int)
    hi = np.floor((c + half_width) * domain.period).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.n)
    xi = idx / domain.period
    prof = np.prod(np.cos(0.5 * np.pi * (xi - c) / half_width) ** 2, axis=1)
    ok = prof > 1e-14
    if min_margin > 0:
        ok &= atom_margins(xi, k) >= min_margin
    xi, idx, prof = xi[ok], idx[ok], prof[ok]
    tau = color.sign * np.linalg.norm(xi, axis=1)
    phase = np.exp(-2j * np.pi * (xi @ np.asarray(x0, dtype=float) + t0 * tau))
    amp = (prof * phase)[:, None] * np.ones((1, hilbert_dim))
    return wave_from_indices(domain, color, k, idx, amp)
