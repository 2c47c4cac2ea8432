"""Null-form multipliers on exact spacetime spectra.

A :class:`Spectrum` is a finite sum ``sum_j a_j exp(2 pi i (x.xi_j + t tau_j))``
with real frequencies, so products of waves, multipliers with symbols in
``(xi, tau)`` and the Lorentz-conformal map ``L`` act exactly on the atoms.

Symbols::

    D0    = |xi|
    Dplus = |xi| + |tau|
    Dminus = | |xi| - |tau| |
    Box   = Dplus * Dminus = | |xi|**2 - tau**2 |
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import MixedDomains, NegativeL, SingularSymbol
from .waves import Wave, wave_from_indices

__all__ = [
    "Spectrum", "spectrum_of", "product_spectrum", "SYMBOLS", "symbol_values",
    "apply_multiplier", "lorentz_matrix", "lorentz_rescale", "lorentz_jacobian",
    "lorentz_energy", "commutation_residual", "sector_dyadic_split", "ExponentTuple",
    "ExponentVerdict", "check_exponent_conditions", "toy_pair", "toy_norm", "toy_scan",
]

SYMBOL_FLOOR = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Spacetime spectrum: frequencies ``xi`` (J, n), ``tau`` (J,), amplitudes (J, H).

    ``period`` records the spatial torus on which the spatial frequencies live
    (``None`` once a map has moved them off the lattice).
    """

    xi: np.ndarray
    tau: np.ndarray
    amp: np.ndarray
    period: float | None = None

    def __post_init__(self):
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        amp = np.asarray(self.amp, dtype=complex)
        if amp.ndim == 1:
            amp = amp[:, None]
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float).reshape(-1))
        object.__setattr__(self, "amp", amp)

    @property
    def n(self) -> int:
        return self.xi.shape[1]

    def __len__(self) -> int:
        return self.xi.shape[0]

    def evaluate(self, points, chunk: int = 2048) -> np.ndarray:
        """Values at spacetime points ``(P, n+1)``, shape ``(P, H)``."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((len(P), self.amp.shape[1]), dtype=complex)
        for s in range(0, len(P), chunk):
            ph = P[s:s + chunk, :-1] @ self.xi.T + np.outer(P[s:s + chunk, -1], self.tau)
            out[s:s + chunk] = np.exp(2j * np.pi * ph) @ self.amp
        return out

    def coalesce(self, decimals: int = 12) -> "Spectrum":
        """Merge atoms with equal ``(xi, tau)`` (after rounding) by adding amplitudes."""
        if not len(self):
            return self
        key = np.round(np.column_stack([self.xi, self.tau]), decimals)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        amp = np.zeros((len(uniq), self.amp.shape[1]), dtype=complex)
        np.add.at(amp, inv.reshape(-1), self.amp)
        return Spectrum(uniq[:, :-1], uniq[:, -1], amp, self.period)

    def energy(self) -> float:
        """``L**n sum |a|**2`` (requires a lattice spectrum with one atom per frequency)."""
        if self.period is None:
            raise ValueError("energy needs a lattice spectrum")
        return float(np.sum(np.abs(self.amp) ** 2)) * self.period ** self.n


def spectrum_of(wave: Wave) -> Spectrum:
    return Spectrum(wave.xi, wave.tau, wave.amp, wave.period)


def product_spectrum(phi, psi, conjugate: bool = False) -> Spectrum:
    """Joint spectrum of ``phi (x) psi`` (or ``phi (x) conj(psi)``), one atom per pair.

    Raises
    ------
    MixedDomains
        the two factors live on tori of different periods.
    """
    a = spectrum_of(phi) if isinstance(phi, Wave) else phi
    b = spectrum_of(psi) if isinstance(psi, Wave) else psi
    if a.period is not None and b.period is not None and a.period != b.period:
        raise MixedDomains(f"periods {a.period} and {b.period} differ")
    period = a.period if a.period == b.period else None
    if not len(a) or not len(b):
        H = a.amp.shape[1] * b.amp.shape[1]
        return Spectrum(np.zeros((0, a.n)), np.zeros(0), np.zeros((0, H)), period)
    sb = -1.0 if conjugate else 1.0
    xi = (a.xi[:, None, :] + sb * b.xi[None, :, :]).reshape(-1, a.n)
    tau = (a.tau[:, None] + sb * b.tau[None, :]).reshape(-1)
    bamp = b.amp.conj() if conjugate else b.amp
    amp = np.einsum("ja,kb->jkab", a.amp, bamp).reshape(len(xi), -1)
    return Spectrum(xi, tau, amp, period)


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

def _d0(xi, tau):
    return np.linalg.norm(xi, axis=-1)


def _dplus(xi, tau):
    return np.linalg.norm(xi, axis=-1) + np.abs(tau)


def _dminus(xi, tau):
    return np.abs(np.linalg.norm(xi, axis=-1) - np.abs(tau))


def _box(xi, tau):
    return _dplus(xi, tau) * _dminus(xi, tau)


SYMBOLS = {"D0": _d0, "Dplus": _dplus, "Dminus": _dminus, "Box": _box}


def symbol_values(spec: Spectrum, symbol: str) -> np.ndarray:
    try:
        return SYMBOLS[symbol](spec.xi, spec.tau)
    except KeyError:
        raise ValueError(f"unknown symbol {symbol!r}; choose from {sorted(SYMBOLS)}") from None


def apply_multiplier(spec: Spectrum, symbol: str, beta: complex = 1.0) -> Spectrum:
    """Multiply every amplitude by ``symbol(xi, tau)**beta`` (``beta`` may be complex).

    Raises
    ------
    SingularSymbol
        ``Re(beta) < 0`` and some symbol value is below ``1e-9``.
    """
    s = symbol_values(spec, symbol)
    if beta == 0:
        return Spectrum(spec.xi, spec.tau, spec.amp.copy(), spec.period)
    if np.real(beta) < 0 and np.any(s < SYMBOL_FLOOR):
        raise SingularSymbol(f"{symbol} vanishes on {int(np.sum(s < SYMBOL_FLOOR))} atoms")
    with np.errstate(divide="ignore"):
        f = np.where(s > 0, np.exp(beta * np.log(np.where(s > 0, s, 1.0))), 0.0)
    if np.isrealobj(f):
        f = f.astype(float)
    return Spectrum(spec.xi, spec.tau, spec.amp * f[:, None], spec.period)


# ---------------------------------------------------------------------------
# Lorentz-conformal rescaling
# ---------------------------------------------------------------------------

def lorentz_matrix(l: int, n: int) -> np.ndarray:
    """Matrix of ``L`` on ``(xi_1, xi', tau)``."""
    if l < 0:
        raise NegativeL("l must be a non-negative integer")
    e = 2.0 ** (-2 * l)
    A = np.zeros((n + 1, n + 1))
    A[0, 0] = A[n, n] = (1 + e) / 2
    A[0, n] = A[n, 0] = (1 - e) / 2
    for i in range(1, n):
        A[i, i] = 2.0 ** (-l)
    return A


def lorentz_rescale(obj, l: int):
    """``T_L F = F o L^*``: frequencies ``(xi, tau)`` are mapped by ``L``.

    Wave inputs are accepted only for ``l = 0`` (the map leaves the lattice
    otherwise); spectra are mapped exactly.
    """
    if l < 0:
        raise NegativeL("l must be a non-negative integer")
    if isinstance(obj, Wave):
        if l != 0:
            raise ValueError("waves can only be rescaled with l = 0; use spectrum_of first")
        return obj
    A = lorentz_matrix(l, obj.n)
    z = np.column_stack([obj.xi, obj.tau]) @ A.T
    return Spectrum(z[:, :-1], z[:, -1], obj.amp.copy(), obj.period if l == 0 else None)


def lorentz_jacobian(xi, l: int, sign: int = 1) -> np.ndarray:
    """``|det d xi~ / d xi|`` for ``xi~ = spatial part of L(xi, sign |xi|)``.

    Closed form ``2**(-l(n-1)) (a + b sign cos(theta))`` with
    ``a = (1 + 4**-l)/2``, ``b = (1 - 4**-l)/2`` and ``theta`` the angle to ``e_1``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    n = xi.shape[1]
    e = 2.0 ** (-2 * l)
    cos = xi[:, 0] / np.linalg.norm(xi, axis=1)
    return 2.0 ** (-l * (n - 1)) * np.abs((1 + e) / 2 + sign * (1 - e) / 2 * cos)


def lorentz_energy(wave: Wave, l: int) -> float:
    """Energy of ``T_L phi`` read as a wave: ``L**n sum |a_j|**2 / J(xi_j)``.

    The atoms of ``phi`` are point samples of a density; under the change of
    variables ``xi -> xi~`` the density picks up ``1/J`` and the cell volume ``J``,
    so the squared norm picks up ``1/J``.
    """
    J = lorentz_jacobian(wave.xi, l, wave.color.sign)
    return float(np.sum(np.sum(np.abs(wave.amp) ** 2, axis=1) / J)) * wave.period ** wave.n


def commutation_residual(spec: Spectrum, l: int, factor: float | None = None) -> float:
    """``max |T_L(|Box| F) - factor |Box|(T_L F)| / max |a|`` over atoms.

    The default ``factor = 4**l`` is the constant for which the identity holds
    (``Box o L = 4**-l Box``).
    """
    f = 4.0 ** l if factor is None else factor
    left = lorentz_rescale(apply_multiplier(spec, "Box", 1.0), l)
    right = apply_multiplier(lorentz_rescale(spec, l), "Box", 1.0)
    scale = float(np.max(np.abs(spec.amp))) if len(spec) else 1.0
    if not len(spec):
        return 0.0
    return float(np.max(np.abs(left.amp - f * right.amp))) / scale


# ---------------------------------------------------------------------------
# dyadic-sector split
# ---------------------------------------------------------------------------

def sector_dyadic_split(wave: Wave, l: int) -> dict:
    """Partition the atoms by dyadic shell ``floor(log2 |xi|)`` and angular sector.

    The sector index is ``round(theta 2**l)`` in the plane and
    ``round(2**l xi'/|xi|)`` in higher dimension, so sectors have width ``2**-l``.
    Returns ``{(shell, sector...): Wave}`` with keys in sorted order.
    """
    if not wave.n_atoms:
        return {}
    mod = wave.modulus
    shell = np.floor(np.log2(mod)).astype(int)
    if wave.n == 2:
        th = np.arctan2(wave.xi[:, 1], wave.xi[:, 0])
        sec = np.round(th * 2.0 ** l).astype(int)[:, None]
    else:
        sec = np.round(2.0 ** l * wave.xi[:, 1:] / mod[:, None]).astype(int)
    keys = np.column_stack([shell, sec])
    out = {}
    for key in sorted({tuple(int(v) for v in k) for k in keys}):
        sel = np.all(keys == np.asarray(key), axis=1)
        out[key] = wave_from_indices(wave.domain, wave.color, wave.k, wave.index[sel],
                                     wave.amp[sel], validate=False)
    return out


# ---------------------------------------------------------------------------
# exponent conditions
# ---------------------------------------------------------------------------

def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)          # ints exactly, floats by their binary value


@dataclass(frozen=True)
class ExponentTuple:
    """``(p, beta_0, beta_+, beta_-, alpha_1, alpha_2)`` in dimension ``n``.

    Give rationals as :class:`fractions.Fraction`, ints or strings such as
    ``"5/3"`` for exact arithmetic; floats are taken at their binary value.
    """

    p: object
    beta0: object
    beta_plus: object
    beta_minus: object
    alpha1: object
    alpha2: object
    n: int = 2

    def __post_init__(self):
        if _q(self.p) <= 0:
            raise ValueError("p must be positive")

    def exact(self) -> dict:
        return {k: _q(getattr(self, k)) for k in
                ("p", "beta0", "beta_plus", "beta_minus", "alpha1", "alpha2")}


@dataclass(frozen=True)
class ExponentVerdict:
    conditions: dict
    thresholds: dict
    admissible: bool

    def as_dict(self) -> dict:
        return {"conditions": dict(self.conditions),
                "thresholds": {k: str(v) for k, v in self.thresholds.items()},
                "admissible": self.admissible}


def check_exponent_conditions(t: ExponentTuple, strict: bool = True) -> ExponentVerdict:
    """Evaluate the scaling identity and the inequalities exactly.

    With ``strict`` (the sufficient conditions) the beta-minus, beta-0 and
    alpha-i inequalities are strict, the two alpha-sum conditions are replaced
    by the strict linear condition, and ``p = p_0`` allows equality in beta-0.
    Without ``strict`` every inequality is taken non-strictly (the necessary
    conditions).
    """
    e = t.exact()
    n = Fraction(t.n)
    p = e["p"]
    inv = 1 / p
    p0 = (n + 3) / (n + 1)
    th = {
        "scaling_rhs": e["alpha1"] + e["alpha2"] + (n + 1) * inv - n,
        "p0": p0,
        "beta_minus": (n + 1) / (2 * p) - (n - 1) / 2,
        "beta0_weak": (n + 1) * inv - n,
        "beta0": (n + 3) * inv - (n + 1),
        "a12_1": inv,
        "a12_2": (n + 3) * inv - n,
        "alpha_a": e["beta_minus"] + n / 2,
        "alpha_b": e["beta_minus"] + (n - 1) / 2 + (n + 1) / 2 * (Fraction(1, 2) - inv),
        "alpha_c": e["beta_minus"] + (n - 1) / 2 + (n + 2) * (Fraction(1, 2) - inv),
        "lin": Fraction(1, 2) + (n + 3) / (n - 1) * (inv - Fraction(1, 2)),
    }
    s = e["beta0"] + e["beta_plus"] + e["beta_minus"]
    a12 = e["alpha1"] + e["alpha2"]
    gt = (lambda a, b: a > b) if strict else (lambda a, b: a >= b)
    lt = (lambda a, b: a < b) if strict else (lambda a, b: a <= b)
    cond = {
        "scaling": s == th["scaling_rhs"],
        "p_range": p0 <= p <= 2,
        "beta_minus": gt(e["beta_minus"], th["beta_minus"]),
        "beta0_weak": e["beta0"] >= th["beta0_weak"],
        "beta0": (e["beta0"] >= th["beta0"]) if (p == p0 or not strict) else e["beta0"] > th["beta0"],
        "a12_1": a12 >= th["a12_1"],
        "a12_2": a12 >= th["a12_2"],
        "alpha1": lt(e["alpha1"], th["alpha_c"]),
        "alpha2": lt(e["alpha2"], th["alpha_c"]),
        "alpha_weak": all(a <= th["alpha_a"] and a <= th["alpha_b"] for a in (e["alpha1"], e["alpha2"])),
        "lin": a12 > th["lin"],
    }
    if strict:
        keys = ("scaling", "p_range", "beta_minus", "beta0", "alpha1", "alpha2", "lin")
    else:
        keys = ("scaling", "p_range", "beta_minus", "beta0_weak", "beta0", "a12_1", "a12_2",
                "alpha1", "alpha2", "alpha_weak")
    return ExponentVerdict(cond, th, all(cond[k] for k in keys))


# ---------------------------------------------------------------------------
# frequency-localized toy estimate
# ---------------------------------------------------------------------------

def toy_pair(l: int, k: int, period: float = 32.0, n: int = 2) -> tuple[Spectrum, Spectrum]:
    """Lattice spectra with supports ``xi_1 in [1, 2), xi_2 in [2**-l, 2**(1-l))``
    (``tau = |xi|``) and ``2**k`` times ``-xi_1 in [1, 2), xi_2 in [2**-l, 2**(1-l))``
    (``tau = -|xi|``), with ``sin**2`` profiles, focused at the origin and
    normalized to unit energy."""
    if n != 2:
        raise NotImplementedError("the toy pair is built in the plane")

    def box(sgn1, scale, sign_tau):
        lo1, hi1 = scale * 1.0, scale * 2.0
        lo2, hi2 = scale * 2.0 ** -l, scale * 2.0 ** (1 - l)
        m1 = np.arange(math.ceil(lo1 * period), math.floor(hi1 * period) + 1)
        m2 = np.arange(math.ceil(lo2 * period), math.floor(hi2 * period) + 1)
        M1, M2 = np.meshgrid(m1, m2, indexing="ij")
        xi = np.column_stack([sgn1 * M1.ravel(), M2.ravel()]) / period
        u1 = (np.abs(xi[:, 0]) - lo1) / (hi1 - lo1)
        u2 = (xi[:, 1] - lo2) / (hi2 - lo2)
        prof = np.sin(np.pi * u1) ** 2 * np.sin(np.pi * u2) ** 2
        keep = prof > 1e-14
        xi, prof = xi[keep], prof[keep]
        tau = sign_tau * np.linalg.norm(xi, axis=1)
        amp = prof / math.sqrt(float(np.sum(prof ** 2)) * period ** 2)
        return Spectrum(xi, tau, amp.astype(complex), period)

    return box(1.0, 1.0, 1.0), box(-1.0, 2.0 ** k, -1.0)


def toy_norm(phi: Spectrum, psi: Spectrum, beta: float, p: float, window: float,
             dt: float = 0.25, grid_points: int = 256, chunk: int = 1 << 21) -> float:
    """``|| |Box|**beta (phi psi) ||_{L^p}`` over the torus times ``|t| <= window``.

    For each time slice the joint atoms are coalesced onto the spatial lattice
    and transformed to the grid with one FFT.
    """
    spec = apply_multiplier(product_spectrum(phi, psi), "Box", beta)
    L = spec.period
    idx = np.rint(spec.xi * L).astype(np.int64)
    M = int(grid_points)
    span = idx.max(axis=0) - idx.min(axis=0)
    if np.any(span >= M):
        raise ValueError(f"grid of {M} points cannot hold a lattice span of {int(span.max())}")
    flat = np.ravel_multi_index(tuple(np.mod(idx - idx.min(axis=0), M).T), (M,) * spec.n)
    a = spec.amp[:, 0]
    ts = -window + (np.arange(int(round(2 * window / dt))) + 0.5) * dt
    h = L / M
    parts = []
    for t in ts:
        acc = np.zeros(M ** spec.n, dtype=complex)
        for s in range(0, len(a), chunk):
            c = a[s:s + chunk] * np.exp(2j * np.pi * t * spec.tau[s:s + chunk])
            acc += (np.bincount(flat[s:s + chunk], weights=c.real, minlength=M ** spec.n)
                    + 1j * np.bincount(flat[s:s + chunk], weights=c.imag, minlength=M ** spec.n))
        vals = np.fft.ifftn(acc.reshape((M,) * spec.n)) * M ** spec.n
        parts.append(float(np.sum(np.abs(vals) ** p)))
    return (math.fsum(parts) * h ** spec.n * dt) ** (1.0 / p)


def toy_scan(ls=(0, 1, 2), ks=(0, 1, 2), beta: float = 0.5, p: float = 5 / 3,
             period: float = 32.0, dt: float = 0.25, grid_points: int = 256) -> dict:
    """Normalized multiplier norms on the ``(l, k)`` grid.

    Each value is divided by
    ``2**(beta (k - 2l)) 2**(l ((n+1)/p - (n-1))) 2**(k (1/p - 1/2))``; the time
    window is ``2 * 4**l``, the interaction time of the two sectors.
    """
    n = 2
    out = {}
    for l in ls:
        for k in ks:
            phi, psi = toy_pair(l, k, period)
            val = toy_norm(phi, psi, beta, p, 2.0 * 4.0 ** l, dt, grid_points)
            norm = 2.0 ** (beta * (k - 2 * l)) * 2.0 ** (l * ((n + 1) / p - (n - 1))) \
                * 2.0 ** (k * (1 / p - 0.5))
            out[(l, k)] = val / norm
    return out
