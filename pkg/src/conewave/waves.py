"""Red and blue waves as exact finite sums of on-cone frequency atoms.

A wave of frequency ``2**k`` on the torus ``(R / L Z)**n`` is stored as

.. math::

    \\phi(x, t) = \\sum_j a_j \\, e^{2\\pi i (x \\cdot \\xi_j + s t |\\xi_j|)},

with ``s = +1`` for red and ``s = -1`` for blue waves, lattice frequencies
``xi_j = m_j / L`` (``m_j`` integer) and vector amplitudes ``a_j`` in
``C**hilbert_dim``.  Every atom lies over the sector ``angle(xi, e_1) <= pi/8``
and the band ``2**k <= |xi| <= 2**(k+1)``.

Because the atoms are the source of truth, energy is conserved exactly and
evaluation at any time costs one phase rotation.  Spatial grids appear only in
:func:`sample_slice`, where values at grid points are exact (atoms are folded
modulo the grid size) and the grid is used for quadrature.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import AtomOutsideSector, EmptyWave, MixedDomains, OffLattice

SECTOR_ANGLE = math.pi / 8
CAP_ANGLE = math.pi / 4
_LATTICE_TOL = 1e-9
_SECTOR_TOL = 1e-12


class Color(str, enum.Enum):
    """Propagation colour.  Red atoms oscillate as ``exp(+2 pi i t|xi|)``."""

    RED = "red"
    BLUE = "blue"

    @property
    def sign(self) -> int:
        return 1 if self is Color.RED else -1

    def flipped(self) -> "Color":
        return Color.BLUE if self is Color.RED else Color.RED


@dataclass(frozen=True)
class TorusDomain:
    """Periodic spatial torus standing in for ``R**n``.

    Parameters
    ----------
    n : int
        Spatial dimension, at least 2.
    period : float
        Side length ``L``; admissible frequencies are ``m / L`` with integer ``m``.
    grid_points : int
        Default number of quadrature samples per axis (a power of two).
    """

    n: int = 2
    period: float = 64.0
    grid_points: int = 128

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("dimension n must be an integer >= 2")
        if not self.period > 0:
            raise ValueError("period must be positive")
        g = int(self.grid_points)
        if g < 16 or g & (g - 1):
            raise ValueError("grid_points must be a power of two >= 16")

    @property
    def spacing(self) -> float:
        return self.period / self.grid_points

    def lattice_indices(self, xi) -> np.ndarray:
        """Integer lattice coordinates ``m = xi * L``; raises :class:`OffLattice`."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        scaled = xi * self.period
        m = np.rint(scaled)
        if xi.size and np.max(np.abs(scaled - m)) > _LATTICE_TOL * max(1.0, np.max(np.abs(scaled))):
            raise OffLattice("frequency is not a multiple of 1/period")
        return m.astype(np.int64)

    def frequencies(self, index) -> np.ndarray:
        return np.asarray(index, dtype=float) / self.period

    def to_dict(self) -> dict:
        return {"n": self.n, "period": self.period, "grid_points": self.grid_points}


class FrequencyAtom(NamedTuple):
    """One point mass of the spatial Fourier transform: frequency and amplitude."""

    xi: Sequence[float]
    amplitude: Sequence[complex]


def _norms(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", v, v))


def sector_angles(xi: np.ndarray) -> np.ndarray:
    """Angle between each row of ``xi`` and ``e_1``."""
    xi = np.atleast_2d(xi)
    return np.arctan2(_norms(xi[:, 1:]), xi[:, 0])


def in_sector(xi: np.ndarray, k: int, tol: float = _SECTOR_TOL) -> np.ndarray:
    """Boolean mask of frequencies over ``2**k Sigma^red`` (band and sector)."""
    xi = np.atleast_2d(xi)
    rho = _norms(xi) / 2.0 ** k
    ang = sector_angles(xi)
    return (rho >= 1 - tol) & (rho <= 2 + 2 * tol) & (ang <= SECTOR_ANGLE + tol)


@dataclass(frozen=True, eq=False)
class Wave:
    """Immutable red or blue wave; build it with :func:`make_wave`.

    ``index`` holds integer lattice coordinates ``(J, n)``, ``amp`` the complex
    amplitudes ``(J, hilbert_dim)`` at time zero.  Atoms are unique.
    """

    domain: TorusDomain
    color: Color
    k: int
    hilbert_dim: int
    index: np.ndarray
    amp: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- basic views -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def period(self) -> float:
        return self.domain.period

    @property
    def n_atoms(self) -> int:
        return self.index.shape[0]

    @property
    def xi(self) -> np.ndarray:
        if "xi" not in self._cache:
            self._cache["xi"] = self.domain.frequencies(self.index)
        return self._cache["xi"]

    @property
    def modulus(self) -> np.ndarray:
        """``|xi_j|`` for every atom."""
        if "mod" not in self._cache:
            self._cache["mod"] = _norms(self.xi) if self.n_atoms else np.zeros(0)
        return self._cache["mod"]

    @property
    def tau(self) -> np.ndarray:
        """Temporal frequencies ``+-|xi|`` (derived, never stored)."""
        return self.color.sign * self.modulus

    def atoms(self) -> list[FrequencyAtom]:
        return [FrequencyAtom(tuple(x), tuple(a)) for x, a in zip(self.xi, self.amp)]

    def amplitudes_at(self, t: float) -> np.ndarray:
        """Spatial Fourier coefficients of ``phi(., t)``."""
        ph = np.exp(2j * np.pi * t * self.tau)
        return self.amp * ph[:, None]

    def carrier(self) -> np.ndarray:
        """Integer lattice point near the centre of the spectrum, used to demodulate."""
        if not self.n_atoms:
            return np.zeros(self.n, dtype=np.int64)
        lo = self.index.min(axis=0)
        hi = self.index.max(axis=0)
        return (lo + hi) // 2

    # -- algebra ---------------------------------------------------------
    def _check_compatible(self, other: "Wave"):
        if other.domain != self.domain:
            raise MixedDomains("waves live on different tori")
        if (other.color, other.k, other.hilbert_dim) != (self.color, self.k, self.hilbert_dim):
            raise ValueError("waves differ in colour, frequency or Hilbert dimension")

    def __add__(self, other: "Wave") -> "Wave":
        self._check_compatible(other)
        return _from_index(self.domain, self.color, self.k, self.hilbert_dim,
                           np.vstack([self.index, other.index]),
                           np.vstack([self.amp, other.amp]), validate=False)

    def __sub__(self, other: "Wave") -> "Wave":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "Wave":
        return _from_index(self.domain, self.color, self.k, self.hilbert_dim,
                           self.index, self.amp * scalar, validate=False, merge=False)

    __rmul__ = __mul__

    def with_amplitudes(self, amp: np.ndarray) -> "Wave":
        amp = np.asarray(amp, dtype=complex).reshape(self.n_atoms, -1)
        return _from_index(self.domain, self.color, self.k, amp.shape[1],
                           self.index, amp, validate=False, merge=False)

    def __repr__(self) -> str:
        return (f"Wave({self.color.value}, k={self.k}, atoms={self.n_atoms}, "
                f"hilbert_dim={self.hilbert_dim}, period={self.period})")

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "period": self.period,
            "grid_points": self.domain.grid_points,
            "color": self.color.value,
            "k": self.k,
            "hilbert_dim": self.hilbert_dim,
            "atoms": [
                {"xi": [float(v) for v in x],
                 "amp": [[float(c.real), float(c.imag)] for c in a]}
                for x, a in zip(self.xi, self.amp)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Wave":
        dom = TorusDomain(int(d["n"]), float(d["period"]), int(d.get("grid_points", 128)))
        atoms = [FrequencyAtom(a["xi"], [complex(re, im) for re, im in a["amp"]])
                 for a in d["atoms"]]
        return make_wave(dom, Color(d["color"]), int(d["k"]), int(d["hilbert_dim"]), atoms)

    @classmethod
    def from_json(cls, s: str) -> "Wave":
        return cls.from_dict(json.loads(s))


def _from_index(domain, color, k, hilbert_dim, index, amp, validate=True, merge=True) -> Wave:
    index = np.asarray(index, dtype=np.int64).reshape(-1, domain.n)
    amp = np.asarray(amp, dtype=complex).reshape(index.shape[0], hilbert_dim)
    if merge and index.shape[0]:
        uniq, inv = np.unique(index, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        if uniq.shape[0] != index.shape[0]:
            merged = np.zeros((uniq.shape[0], hilbert_dim), dtype=complex)
            np.add.at(merged, inv, amp)
            index, amp = uniq, merged
        else:
            order = np.lexsort(index.T[::-1])
            index, amp = index[order], amp[order]
    if validate and index.shape[0]:
        xi = domain.frequencies(index)
        bad = ~in_sector(xi, k)
        if np.any(np.all(xi == 0, axis=1)):
            raise AtomOutsideSector("zero frequency")
        if np.any(bad):
            x = xi[np.argmax(bad)]
            raise AtomOutsideSector(f"atom {x.tolist()} outside 2^{k} sector/band")
    index.setflags(write=False)
    amp.setflags(write=False)
    return Wave(domain, Color(color), int(k), int(hilbert_dim), index, amp)


def make_wave(domain: TorusDomain, color, k: int, hilbert_dim: int = 1,
              atoms: Iterable = ()) -> Wave:
    """Validated wave from a list of :class:`FrequencyAtom` (or ``(xi, amp)`` pairs).

    Atoms with the same frequency are merged by adding amplitudes.

    Raises
    ------
    AtomOutsideSector
        An atom violates ``2**k <= |xi| <= 2**(k+1)`` or ``angle(xi, e_1) <= pi/8``.
    OffLattice
        An atom is not on the lattice ``Z**n / period``.
    """
    if k < 0:
        raise ValueError("frequency exponent k must be >= 0")
    atoms = list(atoms)
    if not atoms:
        return _from_index(domain, color, k, hilbert_dim,
                           np.zeros((0, domain.n), np.int64), np.zeros((0, hilbert_dim)))
    xi = np.array([np.asarray(a[0], dtype=float) for a in atoms])
    if xi.shape[1] != domain.n:
        raise ValueError("frequency dimension does not match domain")
    amps = [np.atleast_1d(np.asarray(a[1], dtype=complex)) for a in atoms]
    if any(a.shape != (hilbert_dim,) for a in amps):
        raise ValueError(f"every amplitude needs exactly {hilbert_dim} components")
    index = domain.lattice_indices(xi)
    return _from_index(domain, color, k, hilbert_dim, index, np.array(amps))


def wave_from_arrays(domain: TorusDomain, color, k: int, xi, amp) -> Wave:
    """Vectorized constructor: ``xi`` of shape ``(J, n)``, ``amp`` of shape ``(J,)`` or ``(J, H)``."""
    amp = np.asarray(amp, dtype=complex)
    if amp.ndim == 1:
        amp = amp[:, None]
    index = domain.lattice_indices(xi) if len(amp) else np.zeros((0, domain.n), np.int64)
    return _from_index(domain, color, k, amp.shape[1], index, amp)


def wave_from_indices(domain: TorusDomain, color, k: int, index, amp, validate=True) -> Wave:
    """Constructor from integer lattice coordinates."""
    amp = np.asarray(amp, dtype=complex)
    if amp.ndim == 1:
        amp = amp[:, None]
    return _from_index(domain, color, k, amp.shape[1], index, amp, validate=validate)


def zero_wave(domain: TorusDomain, color=Color.RED, k: int = 0, hilbert_dim: int = 1) -> Wave:
    return make_wave(domain, color, k, hilbert_dim, [])


# ---------------------------------------------------------------------------
# evaluation and invariants
# ---------------------------------------------------------------------------

def evaluate(wave: Wave, points, chunk: int = 4096) -> np.ndarray:
    """Exact values at spacetime points.

    Parameters
    ----------
    points : array_like, shape (P, n+1)
        Rows ``(x_1, ..., x_n, t)``; ``x`` is reduced modulo the period.

    Returns
    -------
    ndarray, shape (P, hilbert_dim)
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((pts.shape[0], wave.hilbert_dim), dtype=complex)
    if not wave.n_atoms:
        return out
    L = wave.period
    idx = wave.index.astype(float)
    tau = wave.tau
    for s in range(0, pts.shape[0], chunk):
        p = pts[s:s + chunk]
        x = np.mod(p[:, :-1], L) / L
        # x.m is an exact-ish rational phase; keep it small before scaling by 2 pi
        ph = x @ idx.T
        ph = ph - np.floor(ph)
        ph = ph + np.outer(p[:, -1], tau)
        out[s:s + chunk] = np.exp(2j * np.pi * ph) @ wave.amp
    return out


def energy(wave: Wave) -> float:
    """``E = L**n * sum_j |a_j|**2``, the squared spatial L2 norm at any time."""
    if not wave.n_atoms:
        return 0.0
    return math.fsum(np.abs(wave.amp.ravel()) ** 2) * wave.period ** wave.n


def atom_margins(xi: np.ndarray, k: int) -> np.ndarray:
    """Scale-normalized cone distance of each atom to the complement of the sector.

    For ``a = |xi| / 2**k`` and ``theta = angle(xi, e_1)`` the lifted point
    ``(a w, a)`` is at distance ``sqrt(2)|a - b|`` from the circles ``b = 1, 2``
    and ``sqrt(2) a sqrt(1 - ((1 + cos D)/2)**2)`` from the rays at angle
    ``pi/8``, where ``D = pi/8 - theta``.  The minimum of the three is the
    distance to ``Sigma^+ minus Sigma^red``.
    """
    xi = np.atleast_2d(xi)
    a = _norms(xi) / 2.0 ** k
    theta = sector_angles(xi)
    c = 0.5 * (1.0 + np.cos(SECTOR_ANGLE - theta))
    ang = math.sqrt(2.0) * a * np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    ang = np.where(theta >= SECTOR_ANGLE, 0.0, ang)
    rad = math.sqrt(2.0) * np.minimum(a - 1.0, 2.0 - a)
    return np.clip(np.minimum(rad, ang), 0.0, None)


def margin(wave: Wave) -> float:
    """Distance of the (rescaled) spectrum to the cone outside the sector."""
    if not wave.n_atoms:
        raise EmptyWave("margin of an empty wave is undefined")
    return float(np.min(atom_margins(wave.xi, wave.k)))


def angular_dispersion(wave: Wave) -> float:
    """Diameter of the set of unit directions ``xi / |xi|`` of the atoms."""
    if not wave.n_atoms:
        raise EmptyWave("dispersion of an empty wave is undefined")
    u = wave.xi / wave.modulus[:, None]
    if wave.n == 2:
        # directions lie in an arc shorter than pi: the diameter is the end-to-end chord
        th = np.arctan2(u[:, 1], u[:, 0])
        return float(2.0 * math.sin(0.5 * (th.max() - th.min())))
    best = 0.0
    for s in range(0, len(u), 1024):
        g = u[s:s + 1024] @ u.T
        best = max(best, float(np.max(2.0 - 2.0 * g)))
    return math.sqrt(max(best, 0.0))


def dilate(wave: Wave, j: int, keep_period: bool = False) -> Wave:
    """``D_j phi(x, t) = phi(2**j x, 2**j t)``.

    By default the lattice coordinates are carried and the period is divided by
    ``2**j`` (energy picks up exactly ``2**(-j n)``).  With ``keep_period`` the
    torus is unchanged and the lattice coordinates are multiplied by ``2**j``;
    this raises :class:`OffLattice` when they stop being integers.
    """
    if wave.k + j < 0:
        raise ValueError("dilation would produce a negative frequency exponent")
    if keep_period:
        if j >= 0:
            index = wave.index * (2 ** j)
        else:
            q = 2 ** (-j)
            if np.any(wave.index % q):
                raise OffLattice("dilated frequencies leave the lattice")
            index = wave.index // q
        return _from_index(wave.domain, wave.color, wave.k + j, wave.hilbert_dim,
                           index, wave.amp, validate=False, merge=False)
    dom = TorusDomain(wave.n, wave.period / 2.0 ** j, wave.domain.grid_points)
    return _from_index(dom, wave.color, wave.k + j, wave.hilbert_dim,
                       wave.index, wave.amp, validate=False, merge=False)


def time_reverse(wave: Wave) -> Wave:
    """``T phi(x, t) = phi(x, -t)``: same atoms, opposite colour."""
    return _from_index(wave.domain, wave.color.flipped(), wave.k, wave.hilbert_dim,
                       wave.index, wave.amp, validate=False, merge=False)


def tensor(phi: Wave, psi: Wave) -> np.ndarray:
    """Amplitude tensor of ``phi (x) psi`` on the product Hilbert space, shape ``(J, J', H*H')``."""
    return np.einsum("ja,kb->jkab", phi.amp, psi.amp).reshape(
        phi.n_atoms, psi.n_atoms, phi.hilbert_dim * psi.hilbert_dim)


# ---------------------------------------------------------------------------
# grid sampling
# ---------------------------------------------------------------------------

def sample_slice(wave: Wave, t: float, grid_points: int | None = None,
                 demodulate: bool = True) -> np.ndarray:
    """Values on the uniform torus grid at time ``t``.

    Grid point ``i`` sits at ``x = i * L / M``.  Atoms are folded modulo ``M``,
    so values at grid points are exact for any ``M``.  With ``demodulate`` the
    result is multiplied by the unimodular factor ``exp(-2 pi i x . xi_c)`` of
    the carrier :meth:`Wave.carrier`; magnitudes are unchanged but the quadrature
    of ``|phi|**2`` only has to resolve the spread of the spectrum.

    Returns
    -------
    ndarray, shape (hilbert_dim,) + (M,) * n
    """
    M = int(grid_points or wave.domain.grid_points)
    n = wave.n
    out = np.zeros((wave.hilbert_dim,) + (M,) * n, dtype=complex)
    if not wave.n_atoms:
        return out
    idx = wave.index - (wave.carrier() if demodulate else 0)
    flat = np.ravel_multi_index(tuple(np.mod(idx, M).T), (M,) * n)
    coef = wave.amplitudes_at(t)
    size = M ** n
    for h in range(wave.hilbert_dim):
        c = coef[:, h]
        acc = (np.bincount(flat, weights=c.real, minlength=size)
               + 1j * np.bincount(flat, weights=c.imag, minlength=size))
        out[h] = np.fft.ifftn(acc.reshape((M,) * n)) * size
    return out


def magnitude_slice(wave: Wave, t: float, grid_points: int | None = None) -> np.ndarray:
    """Pointwise Hilbert-space norm ``|phi(x, t)|`` on the torus grid."""
    v = sample_slice(wave, t, grid_points)
    return np.sqrt(np.sum(v.real ** 2 + v.imag ** 2, axis=0))


def grid_coordinates(domain: TorusDomain, grid_points: int | None = None) -> np.ndarray:
    """Coordinates of the torus grid, shape ``(M,)*n + (n,)``."""
    M = int(grid_points or domain.grid_points)
    ax = np.arange(M) * (domain.period / M)
    return np.stack(np.meshgrid(*([ax] * domain.n), indexing="ij"), axis=-1)


# ---------------------------------------------------------------------------
# constructors for common test waves
# ---------------------------------------------------------------------------

def plane_wave(domain: TorusDomain, color, k: int, xi, amplitude=1.0) -> Wave:
    return make_wave(domain, color, k, 1, [FrequencyAtom(xi, [amplitude])])


def lattice_in_ball(domain: TorusDomain, center, radius: float) -> np.ndarray:
    """Integer lattice coordinates of frequencies within ``radius`` of ``center``."""
    L = domain.period
    c = np.asarray(center, dtype=float) * L
    rr = radius * L
    axes = [np.arange(math.ceil(ci - rr), math.floor(ci + rr) + 1) for ci in c]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.n)
    keep = np.sum((grid - c) ** 2, axis=1) <= rr * rr
    return grid[keep]


def sector_lattice(domain: TorusDomain, k: int, min_margin: float = 0.0) -> np.ndarray:
    """All lattice coordinates over ``2**k Sigma^red`` whose margin is at least ``min_margin``."""
    scale = 2.0 ** k
    idx = lattice_in_ball(domain, [1.5 * scale] + [0.0] * (domain.n - 1), 0.8 * scale)
    xi = domain.frequencies(idx)
    ok = in_sector(xi, k, tol=0.0) & ~np.all(idx == 0, axis=1)
    if min_margin > 0:
        ok &= atom_margins(xi, k) >= min_margin
    return idx[ok]


def wave_packet(domain: TorusDomain, color, k: int, center_xi, sigma: float,
                x0=None, t0: float = 0.0, cutoff: float = 3.5, min_margin: float = 0.0,
                amplitude_vector=None) -> Wave:
    """Gaussian wave packet.

    The spectrum is ``exp(-|xi - xi_c|**2 / (2 sigma**2))`` truncated at
    ``cutoff * sigma`` and to atoms with margin at least ``min_margin``; phases
    are chosen so that the packet is focused at ``x0`` at time ``t0``.  The
    amplitude is multiplied by ``amplitude_vector`` (default ``[1]``).
    """
    n = domain.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    idx = lattice_in_ball(domain, center_xi, cutoff * sigma)
    xi = domain.frequencies(idx)
    ok = in_sector(xi, k, tol=0.0)
    if min_margin > 0:
        ok &= atom_margins(xi, k) >= min_margin
    idx, xi = idx[ok], xi[ok]
    col = Color(color)
    prof = np.exp(-np.sum((xi - np.asarray(center_xi)) ** 2, axis=1) / (2 * sigma ** 2))
    phase = np.exp(-2j * np.pi * (xi @ x0 + col.sign * t0 * _norms(xi)))
    vec = np.array([1.0 + 0j]) if amplitude_vector is None else np.asarray(amplitude_vector, complex)
    amp = (prof * phase)[:, None] * vec[None, :]
    return _from_index(domain, col, k, vec.shape[0], idx, amp)


def normalized(wave: Wave, target: float = 1.0) -> Wave:
    """Rescale so that ``energy == target``."""
    e = energy(wave)
    if e == 0:
        raise EmptyWave("cannot normalize a zero wave")
    return wave * math.sqrt(target / e)
