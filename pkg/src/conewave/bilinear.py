"""Bilinear norms of red-blue products, cone energy, and scaling experiments.

Every "``lesssim R**alpha``" statement is checked as a fitted log-log slope
(:class:`SlopeFit`); constants are never asserted.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import EnergyNotNormalized, GridTooCoarse, MarginTooSmall
from .families import FamilySpec, focused_wave, make_rng, random_wave
from .geometry import ConeNeighbourhood, Cube, Intersection, Region, torus_quadrature, unwrap_coordinates
from .packets import WaveTable
from .waves import (
    Color, TorusDomain, Wave, energy, grid_coordinates, magnitude_slice, margin,
    sample_slice,
)

__all__ = [
    "NormReport", "SlopeFit", "fit_slope", "product_lp_norm", "cone_energy_norms",
    "cone_energy_check", "doublecone_l1_check", "low_dispersion_l2_check",
    "surface_convolution_oracle", "empirical_A_ratio", "extremizer_pair",
    "k_scaling_experiment", "quilt_product_l1",
]


@dataclass(frozen=True)
class NormReport:
    region: dict
    p: float
    value: float
    resolution: float
    err_est: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through ``(x, y)``; ``x`` and ``y`` are logarithms."""

    x: tuple
    y: tuple
    slope: float
    intercept: float
    residual: float
    skipped: bool = False
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def fit_slope(x, y, base: float = 2.0) -> SlopeFit:
    """Fit ``log_base(y)`` against ``log_base(x)``.

    Zero ordinates make the fit meaningless; it is skipped with a flag.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("a slope fit needs at least three points")
    if np.any(y <= 0):
        return SlopeFit(tuple(x), tuple(y), math.nan, math.nan, math.nan, True, "non-positive ordinate")
    lx, ly = np.log(x) / math.log(base), np.log(y) / math.log(base)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return SlopeFit(tuple(lx), tuple(ly), float(coef[0]), float(coef[1]), res)


def _grid(wave: Wave, grid_points: int | None) -> int:
    return int(grid_points or wave.domain.grid_points)


# ---------------------------------------------------------------------------
# product norms
# ---------------------------------------------------------------------------

def product_lp_norm(phi: Wave, psi: Wave, region: Region, p: float,
                    grid_points: int | None = None, dt: float | None = None) -> NormReport:
    """``||phi psi||_{L^p(region)}`` with ``|phi psi| = |phi| |psi|`` pointwise.

    Space uses the torus grid, time the midpoint rule with step ``dt``
    (default: the grid spacing).  ``err_est`` is the change when both steps are
    doubled.

    Raises
    ------
    UnboundedRegion
        the region has no bounding box.
    """
    if not 1 <= p <= 2:
        raise ValueError("p must lie in [1, 2]")
    M = _grid(phi, grid_points)
    dt = float(dt or phi.period / M)

    def fn(t):
        return (magnitude_slice(phi, t, M) * magnitude_slice(psi, t, M)) ** p

    q = torus_quadrature(region, fn, phi.period, M, dt, coarse_check=True)
    val = max(q.value, 0.0) ** (1.0 / p)
    err = abs(val - max(q.value - q.err_est, 0.0) ** (1.0 / p)) if q.value > 0 else 0.0
    return NormReport(region.to_dict(), p, val, q.resolution, err)


# ---------------------------------------------------------------------------
# energy on blue cones
# ---------------------------------------------------------------------------

def cone_energy_norms(waves: list[Wave], vertex, R_list, side: float | None = None,
                      grid_points: int | None = None, dt: float = 1.0) -> np.ndarray:
    """``||phi||_{L2(C^blue(v; R) cap Q)} / E(phi)**1/2`` for every wave and ``R``.

    ``Q`` is the cube of side ``side`` (default ``8 max(R)``) centred at the vertex.
    One pass over time slices serves all waves and radii.
    """
    R_list = [float(R) for R in R_list]
    w0 = waves[0]
    side = float(side or 8 * max(R_list))
    if side > w0.period + 1e-9:
        from .errors import RegionExceedsTorus
        raise RegionExceedsTorus(f"truncation cube {side} wider than the torus {w0.period}")
    M = _grid(w0, grid_points)
    v = np.asarray(vertex, dtype=float)
    Q = Cube(tuple(v[:-1]), float(v[-1]), side)
    cones = [ConeNeighbourhood(tuple(v), R, "blue") for R in R_list]
    X = unwrap_coordinates(grid_coordinates(w0.domain, M), v[:-1], w0.period)
    lo, hi = Q.lifespan()
    nt = max(1, int(math.ceil((hi - lo) / dt)))
    ht = (hi - lo) / nt
    h = w0.period / M
    acc = np.zeros((len(waves), len(R_list)))
    for it in range(nt):
        t = lo + (it + 0.5) * ht
        inQ = Q.contains(X, t)
        d = cones[0].distance(X, t)
        masks = [inQ & (d <= R) for R in R_list]
        if not any(m.any() for m in masks):
            continue
        for i, w in enumerate(waves):
            m2 = magnitude_slice(w, t, M) ** 2
            for j, m in enumerate(masks):
                acc[i, j] += float(np.sum(m2[m]))
    acc *= h ** w0.n * ht
    E = np.array([energy(w) for w in waves])
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sqrt(acc) / np.sqrt(E)[:, None]
    return np.where(E[:, None] > 0, out, 0.0)


def cone_energy_check(phi: Wave, vertex, R_list, side: float | None = None,
                      grid_points: int | None = None, dt: float = 1.0) -> SlopeFit:
    """Slope of ``log ||phi||_{L2(C^blue(v;R) cap Q)}`` against ``log R`` (expected ``<= 1/2``)."""
    if phi.color is not Color.RED:
        raise ValueError("cone energy is measured for red waves")
    if not phi.n_atoms or energy(phi) == 0:
        return SlopeFit(tuple(np.log2(R_list)), (0.0,) * len(R_list), math.nan, math.nan,
                        math.nan, True, "zero wave")
    norms = cone_energy_norms([phi], vertex, R_list, side, grid_points, dt)[0]
    return fit_slope(R_list, norms)


def doublecone_l1_check(phi: Wave, psi: Wave, vertex, r: float, Q: Cube,
                        grid_points: int | None = None, dt: float | None = None):
    """``||phi psi||_{L2(C^purple(v; r) cap Q)}`` and its ratio to ``(r R E(phi) E(psi))**1/2``."""
    region = Intersection((Q, ConeNeighbourhood(tuple(vertex), r, "purple")))
    rep = product_lp_norm(phi, psi, region, 2.0, grid_points, dt)
    den = math.sqrt(r * Q.side * energy(phi) * energy(psi))
    return rep, (rep.value / den if den > 0 else 0.0)


# ---------------------------------------------------------------------------
# low dispersion bilinear L2
# ---------------------------------------------------------------------------

def low_dispersion_l2_check(r_list, trials: int = 20, seed: int = 0,
                            domain: TorusDomain | None = None, window: float = 16.0,
                            dt: float = 0.25, psi_k: int = 0,
                            return_values: bool = False):
    """Fit of ``max_trials ||phi psi||_{L2} / (E(phi) E(psi))**1/2`` against ``r``.

    ``phi`` is a coherent red wave with angular dispersion ``1/r`` about a
    random axis; ``psi`` a coherent blue wave over the whole sector.  Both focus
    at the same random point at ``t = 0`` and the norm is taken over the torus
    times ``|t| <= window``, which contains the whole interaction when
    ``window`` is at most a quarter of the period.
    """
    dom = domain or TorusDomain(2, 64.0, 256)
    M = dom.grid_points
    vals = np.zeros((len(r_list), trials))
    ts = -window + (np.arange(int(round(2 * window / dt))) + 0.5) * dt
    h = dom.period / M
    for a, r in enumerate(r_list):
        for b in range(trials):
            rng = make_rng(seed, "mock", a * 100000 + b)
            phi = random_wave(FamilySpec(dom.n, dom.period, M, "red", 0, 1, 0, 0.05,
                                         1.0 / r, 1.0, 1, True), rng)
            x0 = rng.uniform(0, dom.period, dom.n)
            phi = _refocus(phi, x0)
            psi = _refocus(random_wave(FamilySpec(dom.n, dom.period, M, "blue", psi_k, 1, 0,
                                                  0.05, None, 1.0, 1, True), rng), x0)
            acc = math.fsum(float(np.sum((magnitude_slice(phi, t, M) * magnitude_slice(psi, t, M)) ** 2))
                            for t in ts)
            vals[a, b] = math.sqrt(acc * h ** dom.n * dt)
    fit = fit_slope(r_list, vals.max(axis=1))
    return (fit, vals) if return_values else fit


def _refocus(w: Wave, x0) -> Wave:
    """Same amplitude moduli, phases chosen to focus at ``(x0, 0)``."""
    ph = np.exp(-2j * np.pi * (w.xi @ np.asarray(x0, dtype=float)))
    return w.with_amplitudes(np.abs(w.amp) * ph[:, None])


def surface_convolution_oracle(r: float, k: int = 0, n: int = 2, radial: int = 160,
                               angular: int = 48, zeta_grid: int = 41, bin_width: float = 0.02,
                               zeta_window=None) -> float:
    """``sup |d sigma_1 * d sigma_2|`` by direct sampling (``n = 2``).

    ``sigma_1`` is surface measure on the red sector of aperture ``1/r`` about
    ``e_1`` with ``1 <= |xi| <= 2``; ``sigma_2`` on ``2**k Sigma^blue``.  At a
    spacetime frequency ``(zeta, tau)`` the convolution density is
    ``2 int delta(tau - |xi| + |zeta - xi|) 1[zeta - xi in supp] d xi``; it is
    estimated by histogramming ``|xi| - |zeta - xi|`` over a polar sample of the
    sector for every ``zeta`` of a grid over ``zeta_window`` (default: the
    bounding box of the sum set).
    """
    if n != 2:
        raise NotImplementedError("the sampling oracle is implemented in the plane")
    half = 0.5 / r
    rho = 1.0 + (np.arange(radial) + 0.5) / radial
    th = -half + (np.arange(angular) + 0.5) * (2 * half / angular)
    RR, TT = np.meshgrid(rho, th, indexing="ij")
    xi = np.stack([RR * np.cos(TT), RR * np.sin(TT)], axis=-1).reshape(-1, 2)
    dA = (RR * (1.0 / radial) * (2 * half / angular)).reshape(-1)
    s = 2.0 ** k
    if zeta_window is None:
        lo = np.array([1.0 + s * math.cos(math.pi / 8), -2 * s * math.sin(math.pi / 8) - 2 * half])
        hi = np.array([2.0 + 2 * s, 2 * s * math.sin(math.pi / 8) + 2 * half])
    else:
        lo, hi = (np.asarray(v, dtype=float) for v in zeta_window)
    gx = np.linspace(lo[0], hi[0], zeta_grid)
    gy = np.linspace(lo[1], hi[1], zeta_grid)
    best = 0.0
    for zx in gx:
        for zy in gy:
            eta = np.array([zx, zy]) - xi
            m = np.linalg.norm(eta, axis=1)
            ok = (m >= s) & (m <= 2 * s) & (np.abs(np.arctan2(eta[:, 1], eta[:, 0])) <= math.pi / 8)
            if not ok.any():
                continue
            f = np.linalg.norm(xi[ok], axis=1) - m[ok]
            edges = np.arange(f.min() - bin_width, f.max() + 2 * bin_width, bin_width)
            hist, _ = np.histogram(f, bins=edges, weights=dA[ok])
            best = max(best, 2.0 * float(hist.max()) / bin_width)
    return best


# ---------------------------------------------------------------------------
# empirical best constants
# ---------------------------------------------------------------------------

def _family_hash(pairs) -> str:
    h = hashlib.sha256()
    for phi, psi in pairs:
        h.update(phi.to_json().encode())
        h.update(psi.to_json().encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class ARatio:
    """Empirical maximum of ``||phi psi||_{L^p(Q)}`` over a family; a lower bound on ``A(R)``."""

    value: float
    argmax: int
    family_hash: str
    values: tuple = field(default=())


def empirical_A_ratio(family, Q: Cube, p: float, grid_points: int | None = None,
                      dt: float | None = None, min_margin: float = 0.01) -> ARatio:
    """Largest normalized product norm over ``family`` (pairs with unit energies).

    Raises
    ------
    EnergyNotNormalized
        some energy differs from 1 by more than ``1e-6``.
    MarginTooSmall
        some wave has margin below ``min_margin``.
    """
    vals = []
    for phi, psi in family:
        for w in (phi, psi):
            if abs(energy(w) - 1.0) > 1e-6:
                raise EnergyNotNormalized(f"energy {energy(w):.9g} is not 1")
            if margin(w) < min_margin:
                raise MarginTooSmall(f"margin {margin(w):.4g} below {min_margin}")
        vals.append(product_lp_norm(phi, psi, Q, p, grid_points, dt).value)
    i = int(np.argmax(vals))
    return ARatio(float(vals[i]), i, _family_hash(family), tuple(vals))


# ---------------------------------------------------------------------------
# k scaling
# ---------------------------------------------------------------------------

def extremizer_pair(k: int, domain: TorusDomain | None = None, x0=None, spacing: float = 1.0):
    """The two-wave family saturating the frequency-ratio exponent.

    ``psi`` is blue with a ``cos**2`` profile on the unit frequency cube
    centred at ``1.5 * 2**k e_1``; it stays a unit blob along the null ray
    ``x0 + t e_1`` for ``|t| <~ 2**k``.  ``phi`` has ``2**k`` orthogonal
    components; component ``i`` is a red unit-frequency bump focused at
    ``(x0 + t_i e_1, t_i)`` with ``t_i`` spaced by ``spacing`` along the ray.
    Both are normalized to unit energy.
    """
    if k > 4:
        raise GridTooCoarse("k > 4 is beyond the desk grid")
    dom = domain or TorusDomain(2, 64.0, 128)
    n = dom.n
    x0 = np.asarray(x0 if x0 is not None else [dom.period / 2] * n, dtype=float)
    e1 = np.eye(n)[0]
    psi = focused_wave(dom, "blue", k, 1.5 * 2 ** k * e1, 0.5, x0, 0.0, min_margin=1e-9)
    m = 2 ** k
    times = (np.arange(m) - (m - 1) / 2) * spacing
    base = focused_wave(dom, "red", 0, 1.5 * e1, 0.45, np.zeros(n), 0.0, min_margin=1e-9)
    xi = base.xi
    tau = np.linalg.norm(xi, axis=1)
    cols = []
    for t in times:
        centre = x0 + t * e1
        cols.append(base.amp[:, 0] * np.exp(-2j * np.pi * (xi @ centre + t * tau)))
    amp = np.stack(cols, axis=1)
    from .waves import normalized, wave_from_indices
    phi = wave_from_indices(dom, "red", 0, base.index, amp)
    return normalized(phi), normalized(psi), times


def k_scaling_experiment(k_list, p: float, domain: TorusDomain | None = None,
                         dt: float = 0.25, pad: float = 8.0, return_values: bool = False):
    """Fit ``log2(||phi psi||_{L^p(Q)} / (E(phi) E(psi))**1/2)`` against ``k``.

    ``Q`` is the cube of side ``2**k + pad`` centred on the middle of the ray.
    The expected slope is ``1/p - 1/2``.
    """
    dom = domain or TorusDomain(2, 64.0, 128)
    ratios = []
    for k in k_list:
        phi, psi, _ = extremizer_pair(k, dom)
        x0 = tuple([dom.period / 2] * dom.n)
        Q = Cube(x0, 0.0, min(2.0 ** k + pad, dom.period))
        ratios.append(product_lp_norm(phi, psi, Q, p, dom.grid_points, dt).value)
    ratios = np.array(ratios)
    fit = fit_slope(2.0 ** np.asarray(k_list, dtype=float), ratios)
    return (fit, ratios) if return_values else fit


# ---------------------------------------------------------------------------
# quilts against blue waves
# ---------------------------------------------------------------------------

def quilt_product_l1(table: WaveTable, level: int, psi: Wave, step: float = 1.0,
                     grid_points: int | None = None) -> float:
    """``||[Phi]_level psi||_{L1(Q)} / (R E(Phi)**1/2 E(psi)**1/2)``."""
    from .geometry import subcube_index
    Q = table.cube
    dom = psi.domain
    M = int(grid_points or dom.grid_points)
    X = unwrap_coordinates(grid_coordinates(dom, M), np.asarray(Q.center_x), dom.period)
    lo, hi = Q.lifespan()
    nt = max(1, int(round((hi - lo) / step)))
    ht = (hi - lo) / nt
    h = dom.period / M
    g = table.groups(level)
    nq = table.n_components
    nl = 2 ** ((Q.n + 1) * level)
    onehot = np.zeros((nl, nq))
    onehot[g, np.arange(nq)] = 1.0
    parts = []
    for it in range(nt):
        t = lo + (it + 0.5) * ht
        inQ = Q.contains(X, t)
        if not inQ.any():
            continue
        v = sample_slice(table.wave, t, M)
        comp = np.sum((np.abs(v) ** 2).reshape(nq, table.block, -1), axis=1)
        lev = np.sqrt(onehot @ comp)                     # (nl, M**n)
        where = subcube_index(Q, level, X.reshape(-1, Q.n), t)
        ok = where >= 0
        quilt = np.zeros(where.shape)
        quilt[ok] = lev[where[ok], np.flatnonzero(ok)]
        parts.append(float(np.sum(quilt * magnitude_slice(psi, t, M).reshape(-1))))
    val = math.fsum(parts) * h ** Q.n * ht
    return val / (Q.side * math.sqrt(energy(table.wave) * energy(psi)))
