"""Spatial localization: smoothing kernel, evolution symbol and disk projections.

Kernel
------
``eta_0 = |g_check|**2 / ||g||**2`` where ``g`` is the radial window
``cos(pi |zeta| / (2a))**2`` on ``|zeta| <= a = 1/2``.  Hence ``eta_0 >= 0``,
``int eta_0 = 1`` and ``eta_0_hat = (g * g) / ||g||**2`` vanishes identically
outside the unit ball.  The autocorrelation ``g * g`` is tabulated once per
dimension by Gauss-Legendre quadrature in polar coordinates and interpolated
with a cubic spline.

Projection
----------
``P_D phi(t_D) = w phi(t_D)`` with ``w = chi_D * eta_rho``,
``rho = 2**-k (2**k r)**(1 - 1/N)``.  On the torus ``w`` is a trigonometric
polynomial whose coefficients ``chi_D_hat(nu) eta_0_hat(rho nu) / L**n`` are
known in closed form, so the product is an exact discrete convolution of atom
amplitudes.  The result is propagated to other times by the free evolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import gamma, jv

from .constants import DESK, DeskConstants
from .errors import DiskTooSmall, GridTooCoarse, MarginTooSmall, RegionExceedsTorus
from .geometry import (
    ConeNeighbourhood, Cube, CubeAnnulus, Difference, Disk, torus_quadrature,
    unwrap_coordinates,
)
from .waves import (
    CAP_ANGLE, SECTOR_ANGLE, Color, TorusDomain, Wave, energy,
    grid_coordinates, in_sector, magnitude_slice, margin, sector_angles,
    wave_from_indices,
)

WINDOW_RADIUS = 0.5


# ---------------------------------------------------------------------------
# the kernel eta_0
# ---------------------------------------------------------------------------

def _window(u):
    u = np.asarray(u, dtype=float)
    return np.where(u < WINDOW_RADIUS, 0.5 * (1.0 + np.cos(np.pi * np.minimum(u, WINDOW_RADIUS) / WINDOW_RADIUS)), 0.0)


def _sphere_area(m: int) -> float:
    """Surface measure of the unit sphere ``S^m`` in ``R^(m+1)``."""
    return 2.0 * math.pi ** ((m + 1) / 2) / gamma((m + 1) / 2)


def _gl(lo, hi, x, w):
    return lo + (hi - lo) * (x + 1) / 2, w * (hi - lo) / 2


def _autocorrelation(s, n: int, nodes: int = 64) -> np.ndarray:
    """``int g(|y|) g(|y - s e_1|) dy`` in ``R^n`` for an array of shifts ``s``.

    Polar coordinates about the origin; the radial range is split where the
    angular integration range stops being the full half-circle, so each piece
    has a smooth integrand.
    """
    a = WINDOW_RADIUS
    s = np.atleast_1d(np.asarray(s, dtype=float))
    x, w = leggauss(nodes)
    out = np.zeros_like(s)
    zero = s == 0.0
    if np.any(zero):
        rho, wr = _gl(0.0, a, x, w)
        out[zero] = _sphere_area(n - 1) * float(np.sum(wr * rho ** (n - 1) * _window(rho) ** 2))
    sv = s[~zero][:, None]
    lo = np.maximum(0.0, sv - a)
    mid = np.clip(a - sv, lo, a)
    total = np.zeros(sv.shape[0])
    for p, q in ((lo, mid), (mid, a + 0.0 * sv)):
        rho = p + (q - p) * (x[None, :] + 1) / 2
        wr = w[None, :] * (q - p) / 2
        with np.errstate(invalid="ignore", divide="ignore"):
            cs = (rho ** 2 + sv ** 2 - a * a) / (2 * rho * sv)
        tmax = np.arccos(np.clip(np.nan_to_num(cs, nan=1.0), -1.0, 1.0))
        th = tmax[..., None] * (x + 1) / 2
        wt = tmax[..., None] * w / 2
        r3 = rho[..., None]
        d = np.sqrt(np.maximum(r3 ** 2 + sv[..., None] ** 2 - 2 * r3 * sv[..., None] * np.cos(th), 0.0))
        inner = np.sum(_window(d) * np.sin(th) ** (n - 2) * wt, axis=-1)
        total += np.sum(wr * rho ** (n - 1) * _window(rho) * inner, axis=1)
    out[~zero] = _sphere_area(n - 2) * total
    return out


@lru_cache(maxsize=None)
def _eta_hat_spline(n: int) -> CubicSpline:
    s = np.linspace(0.0, 1.0, 1025)
    vals = np.concatenate([_autocorrelation(s[i:i + 128], n) for i in range(0, s.size, 128)])
    vals = vals / vals[0]
    vals[-1] = 0.0
    return CubicSpline(s, vals, bc_type=((1, 0.0), (1, 0.0)))


def eta_hat(zeta, n: int) -> np.ndarray:
    """Fourier transform of ``eta_0``; equals 1 at the origin and 0 for ``|zeta| >= 1``."""
    zeta = np.asarray(zeta, dtype=float)
    s = np.sqrt(np.sum(zeta * zeta, axis=-1))
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = _eta_hat_spline(n)(s[inside])
    return out


def eta0(x, n: int) -> np.ndarray:
    """Spatial kernel ``eta_0(x) = g_check(|x|)**2 / ||g||_2**2`` (Hankel transform)."""
    x = np.asarray(x, dtype=float)
    q = np.sqrt(np.sum(x * x, axis=-1))
    nodes, weights = leggauss(160)
    rho, wr = _gl(0.0, WINDOW_RADIUS, nodes, weights)
    flat = q.reshape(-1)
    nu = n / 2 - 1
    arg = 2 * np.pi * np.outer(flat, rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        kern = np.where(arg > 0, jv(nu, arg) / np.where(arg > 0, arg, 1.0) ** nu,
                        1.0 / (2 ** nu * gamma(nu + 1)))
    # Hankel transform: g_check(q) = (2 pi)^(nu+1) int g(rho) [J_nu(z)/z^nu](2 pi q rho) rho^(n-1) d rho
    gcheck = (2 * np.pi) ** (nu + 1) * (kern * (_window(rho) * rho ** (n - 1) * wr)).sum(axis=1)
    norm = float(_autocorrelation(0.0, n)[0])
    return (gcheck ** 2 / norm).reshape(q.shape)


@dataclass(frozen=True)
class SmoothingKernel:
    """``eta_r`` on a torus: exact Fourier coefficients and grid samples.

    Attributes
    ----------
    offsets : ndarray (K, n)
        Lattice coordinates ``m`` of the nonzero coefficients (``|m / L| < 1/r``).
    coefficients : ndarray (K,)
        ``eta_0_hat(r m / L) / L**n``.
    grid : ndarray
        Values of the periodized ``eta_r`` on the ``M**n`` grid.
    """

    r: float
    domain: TorusDomain
    offsets: np.ndarray
    coefficients: np.ndarray
    grid: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.sum(self.grid)) * self.domain.spacing ** self.domain.n

    def fourier_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.offsets / self.domain.period, axis=1)))


def kernel_offsets(domain: TorusDomain, radius: float) -> np.ndarray:
    """Lattice coordinates ``m`` with ``|m / L| < radius``."""
    L = domain.period
    R = int(math.ceil(radius * L))
    ax = np.arange(-R, R + 1)
    m = np.stack(np.meshgrid(*([ax] * domain.n), indexing="ij"), axis=-1).reshape(-1, domain.n)
    keep = np.sum(m.astype(float) ** 2, axis=1) < (radius * L) ** 2
    return m[keep]


def make_eta(r: float, domain: TorusDomain, grid_points: int | None = None) -> SmoothingKernel:
    """``eta_r(x) = r**-n eta_0(x / r)`` periodized on the torus.

    Raises
    ------
    GridTooCoarse
        ``r`` spans fewer than four grid cells.
    """
    M = int(grid_points or domain.grid_points)
    h = domain.period / M
    if r < 4 * h:
        raise GridTooCoarse(f"r={r} is below four grid cells ({4 * h})")
    offs = kernel_offsets(domain, 1.0 / r)
    coef = eta_hat(r * offs / domain.period, domain.n) / domain.period ** domain.n
    keep = coef != 0.0
    offs, coef = offs[keep], coef[keep]
    acc = np.zeros((M,) * domain.n)
    np.add.at(acc, tuple(np.mod(offs, M).T), coef)
    grid = np.real(np.fft.ifftn(acc)) * M ** domain.n
    # the periodized kernel is non-negative; the inverse transform leaves roundoff
    grid = np.where(grid < 0, 0.0, grid)
    return SmoothingKernel(r, domain, offs, coef, grid)


# ---------------------------------------------------------------------------
# the evolution symbol a(xi)
# ---------------------------------------------------------------------------

def _smoothstep(x):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return f / (f + g)


def evolution_symbol(xi, k: int = 0) -> np.ndarray:
    """Bump ``a(xi)``: 1 over the sector and band of ``2**k Sigma^red``, 0 off ``2**k Sigma_``.

    Radial ramps occupy ``[1/2, 1]`` and ``[2, 4]`` (in units of ``2**k``), the
    angular ramp ``[pi/8, pi/4]``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    rho = np.sqrt(np.sum(xi * xi, axis=1)) / 2.0 ** k
    ang = sector_angles(xi)
    radial = _smoothstep((rho - 0.5) / 0.5) * (1.0 - _smoothstep((rho - 2.0) / 2.0))
    angular = 1.0 - _smoothstep((ang - SECTOR_ANGLE) / (CAP_ANGLE - SECTOR_ANGLE))
    return radial * angular


def propagation_kernel(t: float, domain: TorusDomain, grid_points: int | None = None,
                       k: int = 0) -> np.ndarray:
    """Periodized ``K_t(x) = int a(xi) exp(2 pi i (x.xi + t|xi|)) d xi`` on the torus grid."""
    M = int(grid_points or domain.grid_points)
    L = domain.period
    R = int(math.ceil(4 * 2.0 ** k * L))
    ax = np.arange(-R, R + 1)
    m = np.stack(np.meshgrid(*([ax] * domain.n), indexing="ij"), axis=-1).reshape(-1, domain.n)
    xi = m / L
    a = evolution_symbol(xi, k)
    keep = a > 0
    m, xi, a = m[keep], xi[keep], a[keep]
    c = a * np.exp(2j * np.pi * t * np.linalg.norm(xi, axis=1)) / L ** domain.n
    flat = np.ravel_multi_index(tuple(np.mod(m, M).T), (M,) * domain.n)
    acc = (np.bincount(flat, c.real, M ** domain.n) + 1j * np.bincount(flat, c.imag, M ** domain.n))
    return np.fft.ifftn(acc.reshape((M,) * domain.n)) * M ** domain.n


# ---------------------------------------------------------------------------
# lattice convolution
# ---------------------------------------------------------------------------

def lattice_convolve(index: np.ndarray, amp: np.ndarray, offsets: np.ndarray,
                     weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact convolution of a sparse lattice sequence with a small kernel.

    Computes ``c(m) = sum_j amp_j weights(m - index_j)`` on the union of the
    shifted supports.  Returns the lattice points and coefficients
    (``amp`` may carry a trailing Hilbert axis).
    """
    if index.shape[0] == 0:
        return index, amp
    amp2 = amp.reshape(amp.shape[0], -1)
    lo = index.min(axis=0) + offsets.min(axis=0)
    hi = index.max(axis=0) + offsets.max(axis=0)
    shape = tuple(hi - lo + 1)
    H = amp2.shape[1]
    dense_in = np.zeros(tuple(index.max(axis=0) - index.min(axis=0) + 1) + (H,), dtype=complex)
    base = index - index.min(axis=0)
    dense_in[tuple(base.T)] = amp2
    occ_in = np.zeros(dense_in.shape[:-1], dtype=bool)
    occ_in[tuple(base.T)] = True
    out = np.zeros(shape + (H,), dtype=complex)
    occ = np.zeros(shape, dtype=bool)
    shift0 = index.min(axis=0) - lo
    for off, wgt in zip(offsets, weights):
        s = shift0 + off
        sl = tuple(slice(si, si + di) for si, di in zip(s, dense_in.shape[:-1]))
        out[sl] += wgt * dense_in
        occ[sl] |= occ_in
    pos = np.argwhere(occ)
    return pos + lo, out[tuple(pos.T)].reshape((-1,) + amp.shape[1:])


# ---------------------------------------------------------------------------
# disk cutoff and projection
# ---------------------------------------------------------------------------

def ball_transform(nu, radius: float, n: int) -> np.ndarray:
    """``int_{|x| <= radius} exp(-2 pi i x.nu) dx`` (real, radial)."""
    q = np.sqrt(np.sum(np.asarray(nu, dtype=float) ** 2, axis=-1))
    out = np.empty_like(q)
    small = q * radius < 1e-8
    vol = math.pi ** (n / 2) / gamma(n / 2 + 1) * radius ** n
    out[small] = vol
    qs = q[~small]
    out[~small] = radius ** (n / 2) * jv(n / 2, 2 * np.pi * radius * qs) / qs ** (n / 2)
    return out


def smoothing_radius(r: float, k: int, constants: DeskConstants = DESK) -> float:
    """``rho = 2**-k (2**k r)**(1 - 1/N)``."""
    return 2.0 ** (-k) * (2.0 ** k * r) ** (1.0 - 1.0 / constants.N)


@dataclass(frozen=True)
class SmoothCutoff:
    """``w = chi_D * eta_rho`` on the torus, as exact Fourier coefficients."""

    disk: Disk
    rho: float
    domain: TorusDomain
    offsets: np.ndarray
    coefficients: np.ndarray

    def profile(self, grid_points: int | None = None) -> np.ndarray:
        """Real values of ``w`` on the torus grid."""
        M = int(grid_points or self.domain.grid_points)
        acc = np.zeros((M,) * self.domain.n, dtype=complex)
        np.add.at(acc, tuple(np.mod(self.offsets, M).T), self.coefficients)
        return np.real(np.fft.ifftn(acc)) * M ** self.domain.n

    @property
    def tail_mass(self) -> float:
        """Mass of ``eta_rho`` outside the ball of radius ``rho``; controls idempotence."""
        return _tail_mass(self.domain.n)


@lru_cache(maxsize=None)
def _tail_mass(n: int) -> float:
    nodes, weights = leggauss(200)
    r, w = _gl(0.0, 1.0, nodes, weights)
    pts = np.zeros((r.size, n))
    pts[:, 0] = r
    inner = _sphere_area(n - 1) * float(np.sum(w * r ** (n - 1) * eta0(pts, n)))
    return max(0.0, 1.0 - inner)


def make_cutoff(D: Disk, domain: TorusDomain, k: int = 0,
                constants: DeskConstants = DESK) -> SmoothCutoff:
    rho = smoothing_radius(D.radius, k, constants)
    if 2 * (D.radius + 2 * rho) > domain.period:
        raise RegionExceedsTorus("disk plus smoothing does not fit on the torus")
    offs = kernel_offsets(domain, 1.0 / rho)
    nu = offs / domain.period
    coef = (ball_transform(nu, D.radius, domain.n) * eta_hat(rho * nu, domain.n)
            * np.exp(-2j * np.pi * nu @ np.asarray(D.center_x)) / domain.period ** domain.n)
    keep = coef != 0
    return SmoothCutoff(D, rho, domain, offs[keep], coef[keep])


def _check_projection(wave: Wave, D: Disk, constants: DeskConstants) -> float:
    s = 2.0 ** wave.k * D.radius
    if D.radius < constants.C0 * 2.0 ** (-wave.k):
        raise DiskTooSmall(f"radius {D.radius} below C0 2^-k = {constants.C0 * 2.0 ** (-wave.k)}")
    need = constants.C0 * s ** (-1.0 + 1.0 / constants.N)
    if wave.n_atoms and margin(wave) < need:
        raise MarginTooSmall(f"margin {margin(wave):.4g} below required {need:.4g}")
    return need


def project_disk_pair(wave: Wave, D: Disk, constants: DeskConstants = DESK) -> tuple[Wave, Wave]:
    """``(P_D phi, (1 - P_D) phi)`` as new waves of the same colour and frequency."""
    _check_projection(wave, D, constants)
    if not wave.n_atoms:
        return wave, wave
    cut = make_cutoff(D, wave.domain, wave.k, constants)
    b = wave.amplitudes_at(D.t)
    idx, c = lattice_convolve(wave.index, b, cut.offsets, cut.coefficients)
    xi = idx / wave.period
    if not np.all(in_sector(xi, wave.k)):
        raise MarginTooSmall("projection spreads the spectrum outside the sector")
    a = evolution_symbol(xi, wave.k)
    c = c * a[:, None]
    # complement on the union of supports
    full = np.zeros_like(c)
    pos = {tuple(m): i for i, m in enumerate(idx)}
    rows = np.array([pos[tuple(m)] for m in wave.index])
    full[rows] = b * evolution_symbol(wave.xi, wave.k)[:, None]
    comp = full - c
    tau = wave.color.sign * np.linalg.norm(xi, axis=1)
    back = np.exp(-2j * np.pi * D.t * tau)[:, None]
    inside = wave_from_indices(wave.domain, wave.color, wave.k, idx, c * back, validate=False)
    outside = wave_from_indices(wave.domain, wave.color, wave.k, idx, comp * back, validate=False)
    return inside, outside


def project_disk(wave: Wave, D: Disk, complement: bool = False,
                 constants: DeskConstants = DESK) -> Wave:
    """``P_D phi`` (or ``(1 - P_D) phi`` with ``complement``).

    Raises
    ------
    DiskTooSmall
        ``r < C0 2**-k``.
    MarginTooSmall
        ``margin(phi) < C0 (2**k r)**(-1 + 1/N)``.
    """
    inside, outside = project_disk_pair(wave, D, constants)
    return outside if complement else inside


# ---------------------------------------------------------------------------
# exact disk norms
# ---------------------------------------------------------------------------

def disk_l2_squared(wave: Wave, D: Disk, chunk: int = 1024) -> float:
    """``||phi(t_D)||_{L2(D)}**2`` evaluated exactly from the atoms.

    ``int_D |phi|^2 = sum_{j,l} <b_j, b_l> chi_D_hat(xi_l - xi_j)`` with ``b`` the
    coefficients at time ``t_D``; needs the disk to fit on the torus.
    """
    if 2 * D.radius > wave.period:
        raise RegionExceedsTorus("disk wider than the torus")
    if not wave.n_atoms:
        return 0.0
    b = wave.amplitudes_at(D.t)
    xi = wave.xi
    c = np.asarray(D.center_x)
    total = 0.0
    G = b.conj()
    for s in range(0, wave.n_atoms, chunk):
        nu = xi[None, :, :] - xi[s:s + chunk, None, :]          # xi_l - xi_j
        F = ball_transform(nu, D.radius, wave.n) * np.exp(-2j * np.pi * nu @ c)
        gram = b[s:s + chunk] @ G.T                               # <b_j, b_l>
        total += float(np.real(np.sum(gram * F)))
    return max(total, 0.0)


def _weighted_exterior(wave: Wave, D: Disk, outer: float, weight_power: float,
                       grid_points: int) -> float:
    """``int_{|x - x_D| > outer} (1 + |x - x_D|/r)**(2 p) |phi(t_D)|**2`` by grid quadrature."""
    X = grid_coordinates(wave.domain, grid_points)
    Y = unwrap_coordinates(X, np.asarray(D.center_x), wave.period)
    d = np.sqrt(np.sum((Y - np.asarray(D.center_x)) ** 2, axis=-1))
    mag2 = magnitude_slice(wave, D.t, grid_points) ** 2
    w = (1.0 + d / D.radius) ** (2 * weight_power)
    h = wave.period / grid_points
    return float(np.sum((w * mag2)[d > outer])) * h ** wave.n


@dataclass
class CutoffReport:
    """Measured quantities of the disk-cutoff estimates, each divided by ``E(phi)`` or its root."""

    radius: float
    smoothing_radius: float
    r_minus: float
    r_plus: float
    energy: float
    energy_ratio_inside: float
    energy_ratio_outside: float
    essential_concentration: float
    essential_vanish: float
    local_energy_slack: float
    nonlocal_energy_slack: float
    margin_before: float
    margin_after: float
    margin_allowance: float
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def cutoff_report(wave: Wave, D: Disk, constants: DeskConstants = DESK,
                  grid_points: int | None = None,
                  ceilings: dict | None = None) -> CutoffReport:
    """Measure the five cutoff estimates and the margin change for ``P_D``.

    Entries (all relative to ``E(phi)``, norms relative to ``E(phi)**0.5``):

    * ``energy_ratio_inside/outside``: ``E(P_D phi)/E``, ``E((1-P_D) phi)/E``;
    * ``essential_concentration``: weighted norm of ``P_D phi`` off ``D_+``
      with weight ``(1 + |x - x_D|/r)**N``;
    * ``essential_vanish``: ``||(1 - P_D) phi||_{L2(D_-)}``;
    * ``local_energy_slack``: ``E(P_D phi) - ||phi||^2_{L2(D_+)}``;
    * ``nonlocal_energy_slack``: ``E((1-P_D) phi) - ||phi||^2_{L2(ext D_-)}``.
    """
    need = _check_projection(wave, D, constants)
    rho = smoothing_radius(D.radius, wave.k, constants)
    s = (2.0 ** wave.k * D.radius) ** (-1.0 / (2 * constants.N))
    Dm, Dp = D.scaled(1 - s), D.scaled(1 + s)
    E = energy(wave)
    if E == 0:
        return CutoffReport(D.radius, rho, Dm.radius, Dp.radius, 0.0, 0.0, 0.0, 0.0, 0.0,
                            0.0, 0.0, 0.0, 0.0, need)
    inside, outside = project_disk_pair(wave, D, constants)
    M = int(grid_points or max(wave.domain.grid_points, 256))
    Ein, Eout = energy(inside), energy(outside)
    conc = _weighted_exterior(inside, D, Dp.radius, constants.N, M)
    vanish = disk_l2_squared(outside, Dm)
    local = Ein - disk_l2_squared(wave, Dp)
    nonlocal_ = Eout - (E - disk_l2_squared(wave, Dm))
    rep = CutoffReport(
        radius=D.radius, smoothing_radius=rho, r_minus=Dm.radius, r_plus=Dp.radius,
        energy=E, energy_ratio_inside=Ein / E, energy_ratio_outside=Eout / E,
        essential_concentration=math.sqrt(conc / E), essential_vanish=math.sqrt(vanish / E),
        local_energy_slack=local / E, nonlocal_energy_slack=nonlocal_ / E,
        margin_before=margin(wave), margin_after=margin(inside) if inside.n_atoms else float("inf"),
        margin_allowance=need,
    )
    for key, cap in (ceilings or {}).items():
        if getattr(rep, key) > cap:
            rep.flags.append(key)
    return rep


# ---------------------------------------------------------------------------
# finite speed of propagation / Huygens
# ---------------------------------------------------------------------------

@dataclass
class HuygensReport:
    """Bilinear norms away from the light cone of a disk, divided by ``E(phi)^.5 E(psi)^.5``."""

    radius: float
    R: float
    inflation: float
    finite_speed: float
    huygens: float
    annulus: float
    regions: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _product_l2(waves_a, waves_b, region, period, M, dt) -> float:
    def fn(t):
        out = 1.0
        for w in waves_a + waves_b:
            out = out * magnitude_slice(w, t, M) ** 2
        return out
    return math.sqrt(torus_quadrature(region, fn, period, M, dt).value)


def huygens_report(phi: Wave, psi: Wave, D: Disk, R: float,
                   constants: DeskConstants = DESK, grid_points: int | None = None,
                   dt: float = 0.5) -> HuygensReport:
    """The three left-hand sides of the Huygens lemma with ``q = 2``.

    * finite speed: ``||((1 - P_D) phi) psi||`` on ``Q(x_D, t_D; r / C)``;
    * Huygens: ``||(P_D phi) psi||`` on ``Q(x_D, t_D; R)`` off ``C^red(x_D, t_D; C r + R**(1/N))``;
    * annulus: ``||(P_D phi)(P_D psi)||`` on ``Q^ann(x_D, t_D; C r + C R**(1/N), R)``.

    ``C`` is ``constants.inflation``.
    """
    if phi.color is not Color.RED or psi.color is not Color.BLUE:
        raise ValueError("expects a red phi and a blue psi")
    if R > phi.period:
        raise RegionExceedsTorus("cube side R exceeds the torus period")
    C = constants.inflation
    r = D.radius
    xD = tuple(D.center_x)
    regions = {
        "finite_speed": Cube(xD, D.t, r / C),
        "huygens": Difference(Cube(xD, D.t, R),
                              ConeNeighbourhood(xD + (D.t,), C * r + R ** (1.0 / constants.N), "red")),
        "annulus": CubeAnnulus(xD, D.t, min(C * r + C * R ** (1.0 / constants.N), 0.999 * R), R),
    }
    Ephi, Epsi = energy(phi), energy(psi)
    if Ephi == 0 or Epsi == 0:
        return HuygensReport(r, R, C, 0.0, 0.0, 0.0, {k: v.to_dict() for k, v in regions.items()})
    norm = math.sqrt(Ephi * Epsi)
    M = int(grid_points or phi.domain.grid_points)
    inside, outside = project_disk_pair(phi, D, constants)
    psi_in = project_disk(psi, D, constants=constants)
    a = _product_l2([outside], [psi], regions["finite_speed"], phi.period, M, dt)
    b = _product_l2([inside], [psi], regions["huygens"], phi.period, M, dt)
    c = _product_l2([inside], [psi_in], regions["annulus"], phi.period, M, dt)
    return HuygensReport(r, R, C, a / norm, b / norm, c / norm,
                         {k: v.to_dict() for k, v in regions.items()})
