"""Wave-packet (tube) decomposition, wave tables, quilts and energy concentration.

Decomposition
-------------
For a red wave ``phi`` and a cube ``Q`` with lifespan centre ``t_Q``:

* ``E`` is a maximal ``1/r``-separated net of directions in the cap
  ``angle(omega, e_1) <= pi/4``; ``A_omega`` are its Voronoi cells.
* ``M`` rotations ``Omega_i`` within angle ``1/(2r)`` of the identity carry
  smooth weights ``w_i``.  The averaged angular projection of an atom ``xi`` to
  ``omega`` is ``W_omega(xi) = sum_i w_i [Omega_i^-1 xi/|xi| in A_omega]``, so
  ``sum_omega W_omega = 1`` atom by atom.
* ``eta^{x_0}(x) = eta_0((x - x_0) / s)`` on the lattice ``x_Q + s Z^n``;
  Poisson summation makes ``sum_{x_0} eta^{x_0} = 1`` exactly because
  ``eta_0_hat`` vanishes on the nonzero integers.
* ``phi_T(t_Q) = eta^{x_T} P_omega_T phi(t_Q)``, an exact lattice convolution
  of atom coefficients, and ``phi_T`` is evolved freely from there.

Tubes move with the packets: the axis of a red tube is ``x_T - omega (t - t_Q)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .constants import DESK, DeskConstants
from .errors import (
    GridTooCoarse, InfeasibleSpec, MarginTooSmall, RegionExceedsTorus, RowSumViolation,
)
from .geometry import Cube, Disk, InteriorSet, Tube, cutoff_tube, subcube_index, subcubes
from .localization import ball_transform, eta_hat, kernel_offsets, lattice_convolve
from .waves import (
    CAP_ANGLE, Wave, energy, evaluate, grid_coordinates, in_sector,
    magnitude_slice, margin, sample_slice, wave_from_indices,
)

__all__ = [
    "DirectionNet", "direction_net", "rotation_family", "angular_weights",
    "tube_scale", "PacketDecomposition", "tube_decompose", "bessel_check",
    "WaveTable", "wave_table_weights", "wave_table_from_weights", "build_wave_table",
    "quilt_eval", "ConcentrationResult", "energy_concentration", "disk_energy_map",
    "spatial_concentration", "local2_correlation", "far_tube_ratio",
    "nonconc_residual", "conc_persist_ratio",
]


# ---------------------------------------------------------------------------
# direction nets and rotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionNet:
    """Maximal ``1/r``-separated directions in the cap, lexicographically ordered."""

    r: float
    directions: np.ndarray

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return self.directions.shape[0]

    def assign(self, u: np.ndarray) -> np.ndarray:
        """Voronoi cell of each unit vector; ties go to the lower index."""
        u = np.asarray(u, dtype=float)
        return np.argmax(u @ self.directions.T, axis=-1)

    def min_separation(self) -> float:
        d = self.directions
        if len(d) < 2:
            return math.inf
        g = np.linalg.norm(d[:, None, :] - d[None, :, :], axis=-1)
        return float(np.min(g[~np.eye(len(d), dtype=bool)]))

    def cell_radius(self, samples: int = 4000, seed: int = 0) -> float:
        """Largest distance from a cap point to its assigned direction (sampled)."""
        u = _cap_samples(self.n, samples, seed)
        a = self.assign(u)
        return float(np.max(np.linalg.norm(u - self.directions[a], axis=1)))


def _cap_samples(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < count:
        v = rng.normal(size=(4 * count, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        out.append(v[v[:, 0] >= math.cos(CAP_ANGLE)])
    return np.concatenate(out)[:count]


def direction_net(r: float, n: int = 2) -> DirectionNet:
    """Maximal ``1/r``-separated subset of the cap containing ``e_1``.

    In the plane the net is the arc progression with chord exactly ``1/r``,
    extended until no further point fits.  In higher dimension it is the greedy
    net over a fine candidate set ordered by distance from ``e_1``.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if n == 2:
        step = 2.0 * math.asin(min(1.0, 0.5 / r))
        m = int(math.floor(CAP_ANGLE / step + 1e-12))
        ang = np.arange(-m, m + 1) * step
        d = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        cand = _cap_samples(n, max(2000, int(40 * (r * CAP_ANGLE) ** (n - 1))), 12345)
        cand = np.concatenate([np.eye(n)[:1], cand])
        cand = cand[np.argsort(-cand[:, 0], kind="stable")]
        chosen: list[np.ndarray] = []
        for u in cand:
            if all(np.linalg.norm(u - v) >= 1.0 / r for v in chosen):
                chosen.append(u)
        d = np.array(chosen)
    order = np.lexsort(d.T[::-1])
    return DirectionNet(float(r), d[order])


def rotation_family(r: float, n: int = 2, count: int = DESK.rotations):
    """``count`` rotations within angle ``1/(2r)`` of the identity and their weights.

    Angles are ``((i + 1/2)/count - 1/2) / r``; weights are proportional to
    ``cos(pi ((i + 1/2)/count - 1/2))**2``, a sampled smooth bump.  For ``n > 2``
    the rotations act in the planes ``(e_1, e_m)`` in turn.

    Returns
    -------
    mats : ndarray, shape (count, n, n)
    weights : ndarray, shape (count,)
    """
    u = (np.arange(count) + 0.5) / count - 0.5
    ang = u / r
    w = np.cos(np.pi * u) ** 2
    w = w / w.sum()
    mats = np.repeat(np.eye(n)[None], count, axis=0)
    for i, a in enumerate(ang):
        m = 1 + i % (n - 1)
        c, s = math.cos(a), math.sin(a)
        mats[i, 0, 0] = c
        mats[i, 0, m] = -s
        mats[i, m, 0] = s
        mats[i, m, m] = c
    return mats, w


def angular_weights(xi: np.ndarray, net: DirectionNet, mats, weights) -> np.ndarray:
    """``W[omega, j] = sum_i w_i [Omega_i^-1 xi_j/|xi_j| in A_omega]``, shape (D, J)."""
    u = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    W = np.zeros((len(net), len(u)))
    cols = np.arange(len(u))
    for R, w in zip(mats, weights):
        cell = net.assign(u @ R)                # rows of u @ R are R^T u
        np.add.at(W, (cell, cols), w)
    return W


def tube_scale(R: float, j: int = 0) -> float:
    """``r = 2**-J R`` in ``[sqrt(R'), 2 sqrt(R')]`` at frequency one, rescaled to ``2**j``."""
    Rs = R * 2.0 ** j
    J = int(math.floor(math.log2(math.sqrt(Rs)) + 1e-12))
    return Rs / 2.0 ** J * 2.0 ** (-j)


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

@dataclass
class PacketDecomposition:
    """Packets ``phi_T`` of a wave, indexed by tubes.

    ``tubes[i]`` and ``packets[i]`` correspond; ``direction_of[i]`` is the net index.
    """

    source: Wave
    cube: Cube
    c: float
    r: float
    spacing: float
    net: DirectionNet
    rotations: np.ndarray
    weights: np.ndarray
    tubes: list = field(default_factory=list)
    packets: list = field(default_factory=list)
    direction_of: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    _stack: tuple | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.tubes)

    def items(self):
        return zip(self.tubes, self.packets)

    def energies(self) -> np.ndarray:
        return np.array([energy(p) for p in self.packets])

    def stack(self) -> tuple[np.ndarray, np.ndarray]:
        """Common lattice support and the packet coefficients on it, shape (T, U, H)."""
        if self._stack is None:
            allidx = np.concatenate([p.index for p in self.packets])
            U, inv = np.unique(allidx, axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            C = np.zeros((len(self.packets), len(U), self.source.hilbert_dim), dtype=complex)
            pos = 0
            for i, p in enumerate(self.packets):
                C[i, inv[pos:pos + p.n_atoms]] = p.amp
                pos += p.n_atoms
            self._stack = (U, C)
        return self._stack

    def combine(self, coeffs) -> Wave:
        """``sum_T coeffs[T] phi_T`` as a wave."""
        U, C = self.stack()
        amp = np.tensordot(np.asarray(coeffs, dtype=float), C, axes=(0, 0))
        src = self.source
        return wave_from_indices(src.domain, src.color, src.k, U, amp, validate=False)

    def reconstruct(self) -> Wave:
        return self.combine(np.ones(len(self)))

    def reconstruction_error(self) -> float:
        """Largest atom-coefficient discrepancy of ``sum_T phi_T - phi``."""
        U, C = self.stack()
        total = C.sum(axis=0)
        src = self.source
        pos = {tuple(m): i for i, m in enumerate(U)}
        ref = np.zeros_like(total)
        missing = 0.0
        for m, a in zip(src.index, src.amp):
            i = pos.get(tuple(m))
            if i is None:
                missing = max(missing, float(np.max(np.abs(a))))
            else:
                ref[i] = a
        return max(missing, float(np.max(np.abs(total - ref))) if total.size else 0.0)

    def dispersion_constant(self) -> float:
        """``max_T angular_dispersion(phi_T) * r`` over non-empty packets."""
        from .waves import angular_dispersion
        vals = [angular_dispersion(p) for p in self.packets if p.n_atoms]
        return max(vals) * self.r if vals else 0.0

    def margin_drop(self) -> float:
        """``margin(phi) - min_T margin(phi_T)``."""
        ms = [margin(p) for p in self.packets if p.n_atoms]
        return margin(self.source) - min(ms) if ms else 0.0

    def significant(self, rel: float = 1e-4) -> np.ndarray:
        """Indices of packets carrying at least ``rel`` of the total packet energy."""
        e = self.energies()
        return np.flatnonzero(e >= rel * e.sum())


def tube_decompose(phi: Wave, Q: Cube, c: float, r: float | None = None,
                   spacing: float | None = None,
                   constants: DeskConstants = DESK) -> PacketDecomposition:
    """Decompose ``phi`` into packets adapted to tubes of radius ``r`` through ``Q``.

    Parameters
    ----------
    phi : Wave
        Red or blue wave of frequency ``2**k``.
    Q : Cube
        Cube of side ``R``; the spatial partition is made at its central time.
    c : float
        Separation parameter, ``0 < c <= 1/4``.
    r : float, optional
        Tube radius; defaults to :func:`tube_scale` of the side.
    spacing : float, optional
        Lattice step ``s`` of the spatial partition, default ``2 r``.  ``L / s``
        must be an integer.

    Raises
    ------
    MarginTooSmall
        ``margin(phi) < (2**k R)**-1/2`` or the partition leaves the sector.
    GridTooCoarse
        fewer than eight grid cells across ``r``.
    """
    if not 0 < c <= 0.25:
        raise InfeasibleSpec("c must lie in (0, 1/4]")
    dom = phi.domain
    R = Q.side
    r = float(r if r is not None else tube_scale(R, phi.k))
    if dom.grid_points * r / dom.period < 8:
        raise GridTooCoarse(f"only {dom.grid_points * r / dom.period:.3g} cells across r={r}")
    need = (2.0 ** phi.k * R) ** -0.5
    if phi.n_atoms and margin(phi) < need:
        raise MarginTooSmall(f"margin {margin(phi):.4g} below (2^k R)^-1/2 = {need:.4g}")
    s = float(spacing if spacing is not None else 2.0 * r)
    per = dom.period / s
    if abs(per - round(per)) > 1e-9 or round(per) < 1:
        raise InfeasibleSpec(f"torus period {dom.period} is not a multiple of spacing {s}")
    per = int(round(per))
    n = phi.n
    freq_r = 2.0 ** phi.k * r            # tube scale in units of the wavelength
    net = direction_net(freq_r, n)
    mats, wts = rotation_family(freq_r, n, constants.rotations)
    dec = PacketDecomposition(phi, Q, c, r, s, net, mats, wts)
    if not phi.n_atoms:
        return dec

    t_Q = float(Q.t)
    b = phi.amplitudes_at(t_Q)
    W = angular_weights(phi.xi, net, mats, wts)
    offs = kernel_offsets(dom, 1.0 / s)
    base = (s / dom.period) ** n * eta_hat(s * offs / dom.period, n)
    keep = base != 0
    offs, base = offs[keep], base[keep]
    lattice = np.array(list(np.ndindex(*([per] * n))), dtype=float) * s
    centers = np.asarray(Q.center_x, dtype=float) + lattice
    centers = np.mod(centers, dom.period)
    tubes, packets, dirs = [], [], []
    for d in range(len(net)):
        sel = W[d] > 0
        if not np.any(sel):
            continue
        idx_d = phi.index[sel]
        amp_d = b[sel] * W[d, sel, None]
        for x in centers:
            wgt = base * np.exp(-2j * np.pi * (offs @ x) / dom.period)
            idx, coef = lattice_convolve(idx_d, amp_d, offs, wgt)
            xi = idx / dom.period
            if not np.all(in_sector(xi, phi.k)):
                raise MarginTooSmall("spatial partition spreads a packet outside the sector")
            tau = phi.color.sign * np.linalg.norm(xi, axis=1)
            coef = coef * np.exp(-2j * np.pi * t_Q * tau)[:, None]
            packets.append(wave_from_indices(dom, phi.color, phi.k, idx, coef, validate=False))
            tubes.append(Tube(tuple(net.directions[d]), tuple(x), r, t_Q, phi.color))
            dirs.append(d)
    dec.tubes, dec.packets, dec.direction_of = tubes, packets, np.array(dirs)
    return dec


# ---------------------------------------------------------------------------
# packet checks
# ---------------------------------------------------------------------------

def bessel_check(dec: PacketDecomposition, m) -> float:
    """``(sum_q0 E(sum_T m[q0, T] phi_T))**1/2 / E(phi)**1/2``.

    Raises
    ------
    RowSumViolation
        some tube's weights do not sum to one within ``1e-9``, or are negative.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[1] != len(dec):
        raise ValueError(f"assignment has {m.shape[1]} columns for {len(dec)} tubes")
    if np.any(m < 0) or np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-9:
        raise RowSumViolation("assignment weights must be non-negative and sum to 1 per tube")
    U, C = dec.stack()
    L = dec.source.period
    n = dec.source.n
    total = 0.0
    for row in m:
        a = np.tensordot(row, C, axes=(0, 0))
        total += float(np.sum(np.abs(a) ** 2)) * L ** n
    return math.sqrt(total / energy(dec.source))


def _packet_slice_distance(T: Tube, t: float, dom, M: int) -> np.ndarray:
    X = grid_coordinates(dom, M)
    return T.axis_distance(X, t, dom.period)


def spatial_concentration(dec: PacketDecomposition, rho: float = 4.0, t: float | None = None,
                          grid_points: int | None = None, rel: float = 1e-4) -> np.ndarray:
    """``||phi_T(t)||_{L2(|x - axis| > rho r)} / E(phi_T)**1/2`` for significant packets."""
    dom = dec.source.domain
    M = int(grid_points or dom.grid_points)
    t = float(dec.cube.t if t is None else t)
    h = dom.period / M
    out = []
    for i in dec.significant(rel):
        T, p = dec.tubes[i], dec.packets[i]
        d = _packet_slice_distance(T, t, dom, M)
        mag2 = magnitude_slice(p, t, M) ** 2
        out.append(math.sqrt(float(np.sum(mag2[d > rho * T.radius])) * h ** dom.n / energy(p)))
    return np.array(out)


def _averaged_projection(dec: PacketDecomposition, d: int) -> Wave:
    src = dec.source
    W = angular_weights(src.xi, dec.net, dec.rotations, dec.weights)[d]
    return src.with_amplitudes(src.amp * W[:, None])


def local2_correlation(dec: PacketDecomposition, t: float | None = None,
                       grid_points: int | None = None, rel: float = 1e-4,
                       constants: DeskConstants = DESK):
    """Spearman correlation of ``E(phi_T)`` with ``||chi~_T(t) P_omega_T phi(t)||_2``.

    The projection is the rotation-averaged angular piece of ``phi`` that feeds
    the packet.  Returns ``(rho, energies, weighted_norms)`` over significant packets.
    """
    dom = dec.source.domain
    M = int(grid_points or dom.grid_points)
    t = float(dec.cube.t if t is None else t)
    X = grid_coordinates(dom, M)
    h = dom.period / M
    sig = dec.significant(rel)
    e = dec.energies()[sig]
    cache: dict[int, np.ndarray] = {}
    norms = []
    for i in sig:
        d = int(dec.direction_of[i])
        if d not in cache:
            cache[d] = magnitude_slice(_averaged_projection(dec, d), t, M) ** 2
        chi = cutoff_tube(dec.tubes[i], X, t, constants.decay_power, dom.period)
        norms.append(math.sqrt(float(np.sum(chi ** 2 * cache[d])) * h ** dom.n))
    norms = np.array(norms)
    if len(sig) < 3:
        return float("nan"), e, norms
    return float(spearmanr(e, norms).statistic), e, norms


def _tube_cube_distance(T: Tube, Q: Cube, period: float, samples: int = 2001) -> float:
    """Spacetime distance from the tube to ``Q`` (minimal image in space)."""
    lo, hi = Q.lifespan()
    ts = np.linspace(lo - period, hi + period, samples)
    ax = T.axis(ts)
    c = np.asarray(Q.center_x)
    d = ax - c
    d = d - period * np.round(d / period)
    dx = np.maximum(np.abs(d) - Q.side / 2, 0.0)
    dt = np.maximum(np.maximum(lo - ts, ts - hi), 0.0)
    dist = np.sqrt(np.sum(dx ** 2, axis=1) + dt ** 2) - T.radius
    return float(max(dist.min(), 0.0))


def far_tube_ratio(dec: PacketDecomposition, factor: float = 4.0, times: int = 5,
                   grid_points: int | None = None) -> tuple[float, int]:
    """Largest sup-norm on ``Q`` among packets with ``dist(T, Q) >= factor R``,
    relative to the largest packet sup-norm on ``Q``.

    Returns the ratio and the number of far packets (ratio ``nan`` if none).
    """
    dom = dec.source.domain
    M = int(grid_points or dom.grid_points)
    Q = dec.cube
    X = grid_coordinates(dom, M)
    c = np.asarray(Q.center_x)
    d = X - c
    d = d - dom.period * np.round(d / dom.period)
    inQ = np.all(np.abs(d) < Q.side / 2, axis=-1)
    lo, hi = Q.lifespan()
    ts = lo + (np.arange(times) + 0.5) * (hi - lo) / times
    sups = np.zeros(len(dec))
    for i, p in enumerate(dec.packets):
        sups[i] = max(float(np.max(magnitude_slice(p, t, M)[inQ])) for t in ts)
    far = np.array([_tube_cube_distance(T, Q, dom.period) >= factor * Q.side for T in dec.tubes])
    if not far.any():
        return float("nan"), 0
    return float(sups[far].max() / sups.max()), int(far.sum())


# ---------------------------------------------------------------------------
# wave tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveTable:
    """Wave table of depth ``j`` on ``Q``: one wave whose Hilbert space is the
    direct sum of one block of size ``block`` per subcube in ``subcubes(Q, j)``."""

    cube: Cube
    depth: int
    wave: Wave
    block: int

    @property
    def n_components(self) -> int:
        return 2 ** ((self.cube.n + 1) * self.depth)

    def component(self, q: int) -> Wave:
        sl = slice(q * self.block, (q + 1) * self.block)
        w = self.wave
        return wave_from_indices(w.domain, w.color, w.k, w.index, w.amp[:, sl], validate=False)

    def component_energies(self) -> np.ndarray:
        w = self.wave
        a2 = np.abs(w.amp) ** 2
        per = a2.reshape(w.n_atoms, self.n_components, self.block).sum(axis=(0, 2))
        return per * w.period ** w.n

    def energy(self) -> float:
        return energy(self.wave)

    def groups(self, level: int) -> np.ndarray:
        """Index of the level-``level`` ancestor of each component."""
        if not 0 <= level <= self.depth:
            raise ValueError(f"level {level} outside 0..{self.depth}")
        cs = subcubes(self.cube, self.depth)
        X = np.array([q.center_x for q in cs])
        t = np.array([q.t for q in cs])
        return subcube_index(self.cube, level, X, t)


def wave_table_weights(dec: PacketDecomposition, psi: Wave | None, depth: int = DESK.C0,
                       step: float = 1.0, constants: DeskConstants = DESK) -> np.ndarray:
    """``m[q0, T] = ||psi chi~_T||_{L2(q0)}**2 + R**(-10 n) E(psi)``.

    The integral uses the midpoint rule with spacing ``step`` in time and the
    torus grid thinned to spacing ``>= step`` in space.  ``psi=None`` keeps only
    the floor term with ``E(psi) = 1``.
    """
    Q = dec.cube
    n = Q.n
    nq = 2 ** ((n + 1) * depth)
    R = Q.side
    if psi is None:
        return np.full((nq, len(dec)), R ** (-10.0 * n))
    dom = psi.domain
    if Q.side > dom.period:
        raise RegionExceedsTorus("cube wider than the torus")
    stride = max(1, int(round(step / dom.spacing)))
    M = dom.grid_points
    X = grid_coordinates(dom, M)[(slice(None, None, stride),) * n]
    h = dom.spacing * stride
    c = np.asarray(Q.center_x)
    d = X - c
    d = d - dom.period * np.round(d / dom.period)
    Xu = c + d
    inQ = np.all(np.abs(d) < Q.side / 2, axis=-1)
    pts = Xu[inQ]
    lo, hi = Q.lifespan()
    nt = max(1, int(round((hi - lo) / step)))
    dt = (hi - lo) / nt
    m = np.zeros((nq, len(dec)))
    for it in range(nt):
        t = lo + (it + 0.5) * dt
        dens = (magnitude_slice(psi, t, M)[(slice(None, None, stride),) * n] ** 2)[inQ]
        qi = subcube_index(Q, depth, pts, t)
        ok = qi >= 0
        onehot = np.zeros((ok.sum(), nq))
        onehot[np.arange(ok.sum()), qi[ok]] = 1.0
        for i0 in range(0, len(dec), 256):
            tubes = dec.tubes[i0:i0 + 256]
            chi2 = np.stack([cutoff_tube(T, pts[ok], t, constants.decay_power, dom.period) ** 2
                             for T in tubes])
            m[:, i0:i0 + len(tubes)] += (onehot.T * dens[ok]) @ chi2.T * (h ** n * dt)
    return m + R ** (-10.0 * n) * energy(psi)


def wave_table_from_weights(dec: PacketDecomposition, m, depth: int) -> WaveTable:
    """``Phi^(q0) = sum_T (m[q0, T] / m_T) phi_T`` with ``m_T = sum_q0 m[q0, T]``."""
    m = np.asarray(m, dtype=float)
    frac = m / m.sum(axis=0, keepdims=True)
    U, C = dec.stack()
    src = dec.source
    nq, H = m.shape[0], src.hilbert_dim
    amp = np.einsum("qt,tuh->uqh", frac, C).reshape(len(U), nq * H)
    w = wave_from_indices(src.domain, src.color, src.k, U, amp, validate=False)
    return WaveTable(dec.cube, depth, w, H)


def build_wave_table(phi: Wave, psi: Wave | None, Q: Cube, c: float, depth: int = DESK.C0,
                     step: float = 1.0, dec: PacketDecomposition | None = None,
                     constants: DeskConstants = DESK, **decompose_kw) -> tuple[WaveTable, PacketDecomposition]:
    """Wave table ``Phi_c(phi, psi; Q)`` of the given depth.

    Returns the table and the decomposition it was assembled from.  Depth 3 is
    the deepest table used in the test matrix.
    """
    if dec is None:
        dec = tube_decompose(phi, Q, c, constants=constants, **decompose_kw)
    m = wave_table_weights(dec, psi, depth, step, constants)
    return wave_table_from_weights(dec, m, depth), dec


def quilt_eval(table: WaveTable, level: int, points) -> np.ndarray:
    """``[Phi]_level`` at spacetime points, shape (P,).

    ``[Phi]_j = sum_{q in Q_j(Q)} |Phi^(q)| chi_q`` with ``|Phi^(q)|`` the norm of
    the sub-vector of components below ``q``.
    """
    if not 0 <= level <= table.depth:
        raise ValueError(f"quilt level {level} exceeds table depth {table.depth}")
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n = table.cube.n
    vals = evaluate(table.wave, P)
    nq = table.n_components
    blocks = (np.abs(vals) ** 2).reshape(len(P), nq, table.block).sum(axis=2)
    g = table.groups(level)
    where = subcube_index(table.cube, level, P[:, :n], P[:, n])
    mask = (g[None, :] == where[:, None])
    out = np.sqrt(np.sum(blocks * mask, axis=1))
    return np.where(where >= 0, out, 0.0)


# ---------------------------------------------------------------------------
# energy concentration
# ---------------------------------------------------------------------------

def _pow2_at_least(x: float) -> int:
    return 1 << max(4, int(math.ceil(math.log2(max(x, 1.0)))))


def disk_energy_map(wave: Wave, t: float, r: float, grid_points: int) -> np.ndarray:
    """``int_{D(c, t; r)} |phi(t)|**2`` for every centre ``c`` of the ``grid_points`` torus grid.

    ``|phi(t)|**2`` is a trigonometric polynomial; its coefficients come from an
    FFT of exact samples on a grid fine enough to avoid aliasing, and the disk
    average multiplies them by the closed-form ball transform.
    """
    M = int(grid_points)
    n = wave.n
    if not wave.n_atoms:
        return np.zeros((M,) * n)
    ext = int(np.max(wave.index.max(axis=0) - wave.index.min(axis=0)))
    if M < 2 * ext + 1:
        raise GridTooCoarse(f"grid {M} aliases a spectrum of lattice extent {ext}")
    v = sample_slice(wave, t, M)
    dens = np.sum(v.real ** 2 + v.imag ** 2, axis=0)
    nu = np.fft.fftfreq(M, d=1.0 / M) / wave.period
    NU = np.stack(np.meshgrid(*([nu] * n), indexing="ij"), axis=-1)
    B = ball_transform(NU, r, n)
    return np.real(np.fft.ifftn(np.fft.fftn(dens) * B))


@dataclass(frozen=True)
class ConcentrationResult:
    value: float
    first_branch: float
    disk_branch: float
    disk: Disk | None

    def as_dict(self) -> dict:
        return {"value": self.value, "first_branch": self.first_branch,
                "disk_branch": self.disk_branch,
                "disk": None if self.disk is None else self.disk.to_dict()}


def energy_concentration(phi: Wave, psi: Wave, r: float, Q: Cube,
                         max_grid: int | None = None) -> ConcentrationResult:
    """``E_{r,Q}(phi, psi) = max(E(phi)^1/2 E(psi)^1/2 / 2, sup_D ||phi||_L2(D) ||psi||_L2(D))``.

    Disks of radius ``r`` are centred on a torus grid of step at most ``r/4`` and
    at times of step ``r/4`` across the lifespan of ``Q``.  The arg-max disk is
    reported (``None`` when the first branch wins).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if 2 * r > phi.period:
        raise RegionExceedsTorus("disk wider than the torus")
    n = phi.n
    first = 0.5 * math.sqrt(energy(phi) * energy(psi))
    cap = max_grid or (1024 if n == 2 else 128)
    ext = max(int(np.max(w.index.max(axis=0) - w.index.min(axis=0))) if w.n_atoms else 0
              for w in (phi, psi))
    M = _pow2_at_least(max(2 * ext + 1, min(4 * phi.period / r, cap)))
    lo, hi = Q.lifespan()
    nt = int(math.floor((hi - lo) / (r / 4))) + 1
    ts = lo + np.arange(nt) * (r / 4)
    ts = ts[ts < hi] if nt > 1 else np.array([lo])
    best, arg = -1.0, None
    for t in ts:
        a = np.maximum(disk_energy_map(phi, t, r, M), 0.0)
        b = np.maximum(disk_energy_map(psi, t, r, M), 0.0)
        prod = np.sqrt(a * b)
        i = int(np.argmax(prod))
        if prod.flat[i] > best:
            best = float(prod.flat[i])
            pos = np.array(np.unravel_index(i, prod.shape)) * (phi.period / M)
            arg = Disk(tuple(pos), float(t), r)
    value = max(first, best)
    return ConcentrationResult(value, first, best, arg if best > first else None)


# ---------------------------------------------------------------------------
# table-level checks
# ---------------------------------------------------------------------------

def nonconc_residual(phi: Wave, table: WaveTable, psi: Wave, c: float, step: float = 1.0,
                     grid_points: int | None = None) -> float:
    """``||(|phi| - [Phi]_depth) psi||_{L2(I^{c,depth}(Q))} / (E(phi) E(psi))**1/2``."""
    Q = table.cube
    dom = phi.domain
    M = int(grid_points or dom.grid_points)
    n = Q.n
    I = InteriorSet(Q, c, table.depth)
    X = grid_coordinates(dom, M)
    d = X - np.asarray(Q.center_x)
    d = d - dom.period * np.round(d / dom.period)
    Xu = np.asarray(Q.center_x) + d
    lo, hi = Q.lifespan()
    nt = max(1, int(round((hi - lo) / step)))
    dt = (hi - lo) / nt
    h = dom.period / M
    g = table.groups(table.depth)
    nq = table.n_components
    total = 0.0
    for it in range(nt):
        t = lo + (it + 0.5) * dt
        inside = I.contains(Xu, t)
        if not inside.any():
            continue
        pts = Xu[inside]
        a = magnitude_slice(phi, t, M)[inside]
        b2 = (magnitude_slice(psi, t, M) ** 2)[inside]
        v = sample_slice(table.wave, t, M)
        comp = np.sum((np.abs(v) ** 2).reshape(nq, table.block, -1), axis=1).reshape(nq, *X.shape[:-1])
        comp = comp[:, inside]
        where = subcube_index(Q, table.depth, pts, t)
        quilt = np.sqrt(np.sum(comp * (g[:, None] == where[None, :]), axis=0))
        total += float(np.sum((a - quilt) ** 2 * b2)) * h ** n * dt
    return math.sqrt(total / (energy(phi) * energy(psi)))


def conc_persist_ratio(phi: Wave, table: WaveTable, psi: Wave, r: float,
                       constants: DeskConstants = DESK, shrink: float = 1.0) -> float:
    """``E_{r', C0 Q}(Phi, psi) / E_{r, C0 Q}(phi, psi)`` with
    ``r' = r (1 - shrink (2**k r)**(-1/(2N)))``."""
    f = 1.0 - shrink * (2.0 ** phi.k * r) ** (-1.0 / (2 * constants.N))
    if f <= 0:
        raise InfeasibleSpec(f"shrunken radius factor {f:.3g} is not positive")
    big = table.cube.scaled(constants.C0)
    num = energy_concentration(table.wave, psi, r * f, big).value
    den = energy_concentration(phi, psi, r, big).value
    return num / den
