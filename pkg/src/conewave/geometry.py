"""Spacetime regions: disks, cubes, annuli, cone neighbourhoods, tubes, interior sets.

All regions are immutable and expose a vectorized membership test
``contains(X, t)`` where ``X`` has shape ``(..., n)`` and ``t`` broadcasts
against ``X.shape[:-1]``.  Bounded regions report a spacetime bounding box,
which drives the deterministic tensor-grid quadrature in
:func:`region_quadrature` and :func:`torus_quadrature`.

Cubes are half-open, ``[c - s/2, c + s/2)`` along each axis, so the dyadic
partitions of :func:`subcubes` are exact and quilts are single valued.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import RegionExceedsTorus, UnboundedRegion
from .waves import CAP_ANGLE, Color

__all__ = [
    "ConeColor", "Region", "Disk", "Cube", "CubeAnnulus", "ConeNeighbourhood", "Tube",
    "InteriorSet", "XSet", "Intersection", "Difference", "cone_distance",
    "cutoff_disk", "cutoff_tube", "subcubes", "subcube_index", "interior_set", "x_set",
    "region_quadrature", "torus_quadrature", "QuadratureResult", "region_from_dict",
    "monte_carlo_fraction",
]


class ConeColor(str, enum.Enum):
    RED = "red"
    BLUE = "blue"
    PURPLE = "purple"


def _vec(x, n=None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if n is not None and v.shape != (n,):
        raise ValueError(f"expected a point with {n} coordinates")
    return v


class Region:
    """Base class: membership, bounding box and JSON form."""

    n: int

    def contains(self, X, t) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Spacetime bounding box ``(lo, hi)`` of length ``n + 1``."""
        raise UnboundedRegion(f"{type(self).__name__} is unbounded")

    @property
    def center(self) -> np.ndarray:
        lo, hi = self.bounds()
        return 0.5 * (lo + hi)

    def to_dict(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError

    def __and__(self, other: "Region") -> "Intersection":
        return Intersection((self, other))

    def __sub__(self, other: "Region") -> "Difference":
        return Difference(self, other)


# ---------------------------------------------------------------------------
# disks and cutoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disk(Region):
    """Spatial ball ``{(x, t_D): |x - x_D| <= r_D}`` at a single time."""

    center_x: tuple
    t: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center_x", tuple(float(v) for v in self.center_x))
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    @property
    def n(self) -> int:
        return len(self.center_x)

    def contains(self, X, t=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        d2 = np.sum((X - np.asarray(self.center_x)) ** 2, axis=-1)
        inside = d2 <= self.radius ** 2
        if t is not None:
            inside = inside & np.isclose(t, self.t)
        return inside

    def bounds(self):
        c = np.asarray(self.center_x)
        return (np.append(c - self.radius, self.t), np.append(c + self.radius, self.t))

    def scaled(self, factor: float) -> "Disk":
        return Disk(self.center_x, self.t, self.radius * factor)

    def to_dict(self) -> dict:
        return {"type": "disk", "x": list(self.center_x), "t": self.t, "r": self.radius}


def cutoff_disk(D: Disk, X, decay_power: float) -> np.ndarray:
    """Polynomial cutoff ``(1 + |x - x_D| / r_D)**(-decay_power)``."""
    X = np.asarray(X, dtype=float)
    d = np.sqrt(np.sum((X - np.asarray(D.center_x)) ** 2, axis=-1))
    return (1.0 + d / D.radius) ** (-decay_power)


# ---------------------------------------------------------------------------
# cubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cube(Region):
    """Half-open spacetime cube of side ``side`` centred at ``(center_x, t)``."""

    center_x: tuple
    t: float
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center_x", tuple(float(v) for v in self.center_x))
        if not self.side > 0:
            raise ValueError("cube side must be positive")

    @property
    def n(self) -> int:
        return len(self.center_x)

    @property
    def lo(self) -> np.ndarray:
        return np.append(np.asarray(self.center_x), self.t) - 0.5 * self.side

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    @property
    def volume(self) -> float:
        return self.side ** (self.n + 1)

    def lifespan(self) -> tuple[float, float]:
        return (self.t - 0.5 * self.side, self.t + 0.5 * self.side)

    def contains(self, X, t) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lo, hi = self.lo, self.hi
        inside = np.all((X >= lo[:-1]) & (X < hi[:-1]), axis=-1)
        t = np.asarray(t, dtype=float)
        return inside & (t >= lo[-1]) & (t < hi[-1])

    def bounds(self):
        return self.lo, self.hi

    def scaled(self, factor: float) -> "Cube":
        """``cQ``: same centre, side multiplied by ``factor``."""
        return Cube(self.center_x, self.t, self.side * factor)

    def annulus(self, r1: float, r2: float) -> "CubeAnnulus":
        return CubeAnnulus(self.center_x, self.t, r1, r2)

    def to_dict(self) -> dict:
        return {"type": "cube", "x": list(self.center_x), "t": self.t, "side": self.side}


@dataclass(frozen=True)
class CubeAnnulus(Region):
    """``Q(x, t; r2)`` with the concentric ``Q(x, t; r1)`` removed."""

    center_x: tuple
    t: float
    r1: float
    r2: float

    def __post_init__(self):
        object.__setattr__(self, "center_x", tuple(float(v) for v in self.center_x))
        if not 0 <= self.r1 < self.r2:
            raise ValueError("annulus needs 0 <= r1 < r2")

    @property
    def n(self) -> int:
        return len(self.center_x)

    def contains(self, X, t):
        outer = Cube(self.center_x, self.t, self.r2).contains(X, t)
        if self.r1 == 0:
            return outer
        return outer & ~Cube(self.center_x, self.t, self.r1).contains(X, t)

    def bounds(self):
        return Cube(self.center_x, self.t, self.r2).bounds()

    def to_dict(self):
        return {"type": "annulus", "x": list(self.center_x), "t": self.t,
                "r1": self.r1, "r2": self.r2}


def subcubes(Q: Cube, j: int) -> list[Cube]:
    """The ``2**((n+1) j)`` dyadic subcubes of side ``2**-j`` times the side of ``Q``.

    Ordered lexicographically in ``(x_1, ..., x_n, t)`` grid position, matching
    :func:`subcube_index`.
    """
    if j < 0:
        raise ValueError("subcube level j must be >= 0")
    m = 2 ** j
    s = Q.side / m
    lo = Q.lo
    out = []
    for pos in np.ndindex(*([m] * (Q.n + 1))):
        c = lo + (np.asarray(pos) + 0.5) * s
        out.append(Cube(tuple(c[:-1]), float(c[-1]), s))
    return out


def subcube_index(Q: Cube, j: int, X, t) -> np.ndarray:
    """Flat index of the level-``j`` subcube containing each point, ``-1`` outside ``Q``."""
    m = 2 ** j
    X = np.asarray(X, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
    P = np.concatenate([X, t[..., None]], axis=-1)
    u = np.floor((P - Q.lo) / (Q.side / m)).astype(np.int64)
    inside = Q.contains(X, t)
    u = np.clip(u, 0, m - 1)
    flat = np.ravel_multi_index(tuple(np.moveaxis(u, -1, 0)), (m,) * (Q.n + 1))
    return np.where(inside, flat, -1)


# ---------------------------------------------------------------------------
# interior sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteriorSet(Region):
    """``I^{c,k}(Q)``: union over level-``k`` subcubes ``q`` of the shrunken ``(1-c) q``."""

    cube: Cube
    c: float
    k: int

    def __post_init__(self):
        if not 0 < self.c < 0.5:
            raise ValueError("interior parameter c must lie in (0, 1/2)")
        if self.k < 0:
            raise ValueError("level k must be >= 0")

    @property
    def n(self) -> int:
        return self.cube.n

    def contains(self, X, t):
        X = np.asarray(X, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
        P = np.concatenate([X, t[..., None]], axis=-1)
        s = self.cube.side / 2 ** self.k
        u = (P - self.cube.lo) / s
        frac = u - np.floor(u)
        inner = np.all(np.abs(frac - 0.5) < 0.5 * (1.0 - self.c), axis=-1)
        return inner & self.cube.contains(X, t)

    def bounds(self):
        return self.cube.bounds()

    def measure_fraction(self) -> float:
        """``|I^{c,k}(Q)| / |Q| = (1 - c)**(n+1)`` exactly."""
        return (1.0 - self.c) ** (self.n + 1)

    def to_dict(self):
        return {"type": "interior", "cube": self.cube.to_dict(), "c": self.c, "k": self.k}


@dataclass(frozen=True)
class XSet(Region):
    """``X(Q) = intersection over j = C0..k of I^{c 2^{-(k-j)/N}, j}(Q)``."""

    cube: Cube
    c: float
    C0: int
    k: int
    N: int

    @property
    def n(self) -> int:
        return self.cube.n

    def levels(self) -> list[InteriorSet]:
        return [InteriorSet(self.cube, self.c * 2.0 ** (-(self.k - j) / self.N), j)
                for j in range(self.C0, self.k + 1)]

    def contains(self, X, t):
        out = self.cube.contains(X, t)
        for lev in self.levels():
            out = out & lev.contains(X, t)
        return out

    def bounds(self):
        return self.cube.bounds()

    def to_dict(self):
        return {"type": "xset", "cube": self.cube.to_dict(), "c": self.c,
                "C0": self.C0, "k": self.k, "N": self.N}


def interior_set(Q: Cube, c: float, k_levels: int) -> InteriorSet:
    return InteriorSet(Q, c, k_levels)


def x_set(Q: Cube, c: float, C0: int, k: int, N: int = 4) -> XSet:
    if not 0 < c < 0.5:
        raise ValueError("interior parameter c must lie in (0, 1/2)")
    return XSet(Q, c, C0, k, N)


# ---------------------------------------------------------------------------
# cones and tubes
# ---------------------------------------------------------------------------

def _cap_extremes(Y: np.ndarray):
    """Range ``[g_min, g_max]`` of ``omega . y`` over the cap ``angle(omega, e_1) <= pi/4``."""
    r = np.sqrt(np.sum(Y * Y, axis=-1))
    th = np.arctan2(np.sqrt(np.sum(Y[..., 1:] ** 2, axis=-1)), Y[..., 0])
    gmax = r * np.cos(np.maximum(0.0, th - CAP_ANGLE))
    gmin = r * np.cos(np.minimum(math.pi, th + CAP_ANGLE))
    return gmin, gmax


def cone_distance(color, vertex, X, t) -> np.ndarray:
    """Euclidean spacetime distance to the capped light cone through ``vertex``.

    The red cone is ``{(x0 + s w, t0 - s)}``, the blue cone ``{(x0 + s w, t0 + s)}``
    for ``s`` real and ``w`` in the cap ``angle(w, e_1) <= pi/4``; purple is their
    union.  For fixed ``w`` the squared distance from ``(y, u) = (x - x0, t - t0)``
    to the line is ``|y|^2 + u^2 - (w.y -+ u)^2 / 2``; the cap contributes the
    interval of attainable ``w.y``, whose endpoints maximize the subtracted term.

    Parameters
    ----------
    vertex : sequence of length n+1
        ``(x0_1, ..., x0_n, t0)``.
    """
    color = ConeColor(color)
    v = _vec(vertex)
    X = np.asarray(X, dtype=float)
    Y = X - v[:-1]
    u = np.asarray(t, dtype=float) - v[-1]
    base = np.sum(Y * Y, axis=-1) + u * u
    gmin, gmax = _cap_extremes(Y)

    def dist(sgn):
        # red: (g - u)^2, blue: (g + u)^2
        best = np.maximum((gmax - sgn * u) ** 2, (gmin - sgn * u) ** 2)
        return np.sqrt(np.clip(base - 0.5 * best, 0.0, None))

    if color is ConeColor.RED:
        return dist(1.0)
    if color is ConeColor.BLUE:
        return dist(-1.0)
    return np.minimum(dist(1.0), dist(-1.0))


@dataclass(frozen=True)
class ConeNeighbourhood(Region):
    """``C^{colour}(x0, t0; r)``: points within distance ``r`` of the capped cone."""

    vertex: tuple
    thickness: float
    color: ConeColor

    def __post_init__(self):
        object.__setattr__(self, "vertex", tuple(float(v) for v in self.vertex))
        object.__setattr__(self, "color", ConeColor(self.color))
        if not self.thickness > 0:
            raise ValueError("cone thickness must be positive")

    @property
    def n(self) -> int:
        return len(self.vertex) - 1

    def distance(self, X, t):
        return cone_distance(self.color, self.vertex, X, t)

    def contains(self, X, t):
        return self.distance(X, t) <= self.thickness

    def to_dict(self):
        return {"type": "cone", "vertex": list(self.vertex), "r": self.thickness,
                "color": self.color.value}


@dataclass(frozen=True)
class Tube(Region):
    """Radius-``r`` neighbourhood of a null ray in direction ``omega``.

    The axis at time ``t`` is ``base + v (t - t0)`` with velocity ``v = -omega``
    for red packets (a red atom ``exp(2 pi i (x.xi + t|xi|))`` travels along
    ``-xi/|xi|``) and ``v = +omega`` for blue ones.
    """

    omega: tuple
    base: tuple
    radius: float
    t0: float = 0.0
    color: Color = Color.RED

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        w = w / np.linalg.norm(w)
        if math.acos(min(1.0, w[0])) > CAP_ANGLE + 1e-12:
            raise ValueError("tube direction must lie within pi/4 of e_1")
        object.__setattr__(self, "omega", tuple(w))
        object.__setattr__(self, "base", tuple(float(v) for v in self.base))
        object.__setattr__(self, "color", Color(self.color))

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def velocity(self) -> np.ndarray:
        return -self.color.sign * np.asarray(self.omega)

    def axis(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.base) + (t - self.t0)[..., None] * self.velocity

    def axis_distance(self, X, t, period: float | None = None) -> np.ndarray:
        """``|x - axis(t)|``; with ``period`` the minimal-image distance on the torus."""
        X = np.asarray(X, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
        d = X - self.axis(t)
        if period is not None:
            d = d - period * np.round(d / period)
        return np.sqrt(np.sum(d * d, axis=-1))

    def contains(self, X, t):
        return self.axis_distance(X, t) <= self.radius

    def to_dict(self):
        return {"type": "tube", "omega": list(self.omega), "x": list(self.base),
                "r": self.radius, "t0": self.t0, "color": self.color.value}


def cutoff_tube(T: Tube, X, t, decay_power: float, period: float | None = None) -> np.ndarray:
    """``chi~_T(x, t)``: the disk cutoff centred on the moving tube axis."""
    return (1.0 + T.axis_distance(X, t, period) / T.radius) ** (-decay_power)


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple

    @property
    def n(self) -> int:
        return self.parts[0].n

    def contains(self, X, t):
        out = None
        for p in self.parts:
            m = p.contains(X, t)
            out = m if out is None else out & m
        return out

    def bounds(self):
        boxes = []
        for p in self.parts:
            try:
                boxes.append(p.bounds())
            except UnboundedRegion:
                continue
        if not boxes:
            raise UnboundedRegion("intersection of unbounded regions")
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        return lo, hi

    def to_dict(self):
        return {"type": "intersection", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Difference(Region):
    keep: Region
    remove: Region

    @property
    def n(self) -> int:
        return self.keep.n

    def contains(self, X, t):
        return self.keep.contains(X, t) & ~self.remove.contains(X, t)

    def bounds(self):
        return self.keep.bounds()

    def to_dict(self):
        return {"type": "difference", "keep": self.keep.to_dict(), "remove": self.remove.to_dict()}


def region_from_dict(d: dict) -> Region:
    """Inverse of ``Region.to_dict``."""
    kind = d["type"]
    if kind == "disk":
        return Disk(d["x"], d["t"], d["r"])
    if kind == "cube":
        return Cube(d["x"], d["t"], d["side"])
    if kind == "annulus":
        return CubeAnnulus(d["x"], d["t"], d["r1"], d["r2"])
    if kind == "cone":
        return ConeNeighbourhood(d["vertex"], d["r"], d["color"])
    if kind == "tube":
        return Tube(d["omega"], d["x"], d["r"], d.get("t0", 0.0), d.get("color", "red"))
    if kind == "interior":
        return InteriorSet(region_from_dict(d["cube"]), d["c"], d["k"])
    if kind == "xset":
        return XSet(region_from_dict(d["cube"]), d["c"], d["C0"], d["k"], d["N"])
    if kind == "intersection":
        return Intersection(tuple(region_from_dict(p) for p in d["parts"]))
    if kind == "difference":
        return Difference(region_from_dict(d["keep"]), region_from_dict(d["remove"]))
    raise ValueError(f"unknown region type {kind!r}")


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    """Integral value with the change observed when the grid step is doubled."""

    value: float
    err_est: float
    resolution: float

    def __float__(self):
        return float(self.value)


def _midpoints(lo: float, hi: float, step: float) -> tuple[np.ndarray, float]:
    count = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
    h = (hi - lo) / count
    return lo + (np.arange(count) + 0.5) * h, h


def _tensor_quadrature(region: Region, integrand, resolution: float) -> float:
    lo, hi = region.bounds()
    spatial_only = isinstance(region, Disk)
    step = 1.0 / resolution
    axes, hs = zip(*[_midpoints(lo[i], hi[i], step) for i in range(region.n)])
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    cell = float(np.prod(hs))
    if spatial_only:
        mask = region.contains(X)
        vals = np.broadcast_to(np.asarray(integrand(X, region.t), dtype=float), mask.shape)
        return float(np.sum(vals[mask])) * cell
    ts, ht = _midpoints(lo[-1], hi[-1], step)
    parts = []
    for t in ts:
        mask = region.contains(X, t)
        if not mask.any():
            continue
        vals = np.broadcast_to(np.asarray(integrand(X, t), dtype=float), mask.shape)
        parts.append(float(np.sum(vals[mask])))
    return math.fsum(parts) * cell * ht


def region_quadrature(region: Region, integrand: Callable | float = 1.0,
                      resolution: float = 16) -> QuadratureResult:
    """Midpoint tensor-grid quadrature restricted by the membership predicate.

    Parameters
    ----------
    integrand : callable ``f(X, t)`` or constant
        ``X`` has shape ``(..., n)``; the return value broadcasts against it.
    resolution : float
        Grid points per unit length per axis (at least 16).

    Returns
    -------
    QuadratureResult
        ``err_est`` is the difference to the same rule at half the resolution.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16 points per unit length")
    f = integrand if callable(integrand) else (lambda X, t, c=float(integrand): c)
    fine = _tensor_quadrature(region, f, resolution)
    coarse = _tensor_quadrature(region, f, resolution / 2)
    return QuadratureResult(fine, abs(fine - coarse), resolution)


def unwrap_coordinates(X: np.ndarray, center: np.ndarray, period: float) -> np.ndarray:
    """Representatives of torus points nearest to ``center``."""
    return center + np.mod(X - center + 0.5 * period, period) - 0.5 * period


def torus_quadrature(region: Region, slice_fn: Callable[[float], np.ndarray],
                     period: float, grid_points: int, dt: float,
                     coarse_check: bool = False) -> QuadratureResult:
    """Integrate a field sampled on the full torus grid over a bounded spacetime region.

    ``slice_fn(t)`` returns the integrand on the uniform torus grid
    ``x = i * period / grid_points`` (shape ``(M,) * n``).  Space uses the
    periodic rectangle rule (exact for trigonometric polynomials the grid
    resolves); time uses the midpoint rule over the region's lifespan with step
    at most ``dt``.  Slice sums are combined with :func:`math.fsum`, so the
    result does not depend on how slices are grouped.

    With ``coarse_check`` the integral is recomputed with every second spatial
    point and twice the time step; the difference is reported as ``err_est``.
    """
    lo, hi = region.bounds()
    n = region.n
    if np.any(hi[:-1] - lo[:-1] > period + 1e-9):
        raise RegionExceedsTorus("region is wider than the torus")
    M = int(grid_points)
    h = period / M
    ax = np.arange(M) * h
    X = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1)
    X = unwrap_coordinates(X, 0.5 * (lo[:-1] + hi[:-1]), period)
    ts, ht = _midpoints(lo[-1], hi[-1], dt)
    fine, coarse = [], []
    sub = (slice(None, None, 2),) * n
    for i, t in enumerate(ts):
        mask = region.contains(X, t)
        if not mask.any():
            continue
        vals = np.asarray(slice_fn(t))
        fine.append(float(np.sum(vals[mask])))
        if coarse_check and i % 2 == 0:
            coarse.append(float(np.sum(vals[sub][mask[sub]])))
    value = math.fsum(fine) * h ** n * ht
    err = 0.0
    if coarse_check:
        err = abs(value - math.fsum(coarse) * (2 * h) ** n * 2 * ht)
    return QuadratureResult(value, err, 1.0 / h)


def monte_carlo_fraction(region: Region, box: Cube, samples: int, rng) -> float:
    """Fraction of uniform samples from ``box`` that fall in ``region``."""
    lo, hi = box.bounds()
    hits = 0
    done = 0
    while done < samples:
        m = min(200_000, samples - done)
        P = lo + (hi - lo) * rng.random((m, box.n + 1))
        hits += int(np.count_nonzero(region.contains(P[:, :-1], P[:, -1])))
        done += m
    return hits / samples
