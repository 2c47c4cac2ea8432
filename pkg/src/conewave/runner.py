"""Experiment configuration, dispatch and CSV/JSON emission.

Configs are TOML files with the sections below; unknown sections or keys are
hard errors reported with the offending line.

.. code-block:: toml

    [run]
    experiment = "kscaling"
    seed = 7
    threads = 4

    [domain]
    period = 64.0
    grid_points = 128

    [sweep]
    k = [0, 1, 2, 3, 4]
    p = [1.6666666666666667, 2.0]
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict, replace

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError

__all__ = ["ExperimentConfig", "ExperimentResult", "EXPERIMENTS", "load_config",
           "config_from_dict", "run", "write_csv", "write_json"]

EXPERIMENTS = ("mock", "bluecone", "doublecone", "kscaling", "aratio", "toyscan")

_SCHEMA = {
    "run": {"experiment": str, "seed": int, "threads": int, "quad_res": int},
    "domain": {"n": int, "period": float, "grid_points": int},
    "family": {"atoms": int, "count": int, "dispersion": float, "k": int,
               "min_margin": float, "coherent": bool},
    "sweep": {"r": list, "R": list, "c": list, "l": list, "k": list, "p": list},
    "tolerance": {"slope_min": float, "slope_max": float, "value_max": float},
    "output": {"csv": str, "json": str},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "kscaling"
    seed: int = 0
    threads: int = 1
    quad_res: int | None = None
    n: int = 2
    period: float = 64.0
    grid_points: int = 128
    atoms: int = 50
    count: int = 4
    dispersion: float | None = None
    k: int = 0
    min_margin: float = 0.01
    coherent: bool = False
    sweep: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    csv: str | None = None
    json: str | None = None

    def config_hash(self) -> str:
        d = asdict(self)
        for k in ("threads", "csv", "json"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ExperimentResult:
    config_hash: str
    experiment: str
    columns: list
    rows: list
    verdicts: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def _line_of(text: str, section: str, key: str | None) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if key is not None and cur == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return i
    return None


def _where(text, section, key=None) -> str:
    line = _line_of(text, section, key) if text else None
    name = f"{section}.{key}" if key else f"[{section}]"
    return f"{name} (line {line})" if line else name


def config_from_dict(data: dict, text: str = "") -> ExperimentConfig:
    """Validate a parsed TOML document.

    Raises
    ------
    ConfigError
        unknown section or key, wrong type, empty sweep grid, unknown experiment.
    """
    kw = {}
    for sec, body in data.items():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section {_where(text, sec)}")
        if not isinstance(body, dict):
            raise ConfigError(f"{sec} must be a table")
        for key, val in body.items():
            typ = _SCHEMA[sec].get(key)
            if typ is None:
                raise ConfigError(f"unknown key {_where(text, sec, key)}")
            if typ is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
                raise ConfigError(f"{_where(text, sec, key)} must be {typ.__name__}")
            if sec == "sweep":
                if not val:
                    raise ConfigError(f"empty sweep grid {_where(text, sec, key)}")
                if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
                    raise ConfigError(f"{_where(text, sec, key)} must hold numbers")
                kw.setdefault("sweep", {})[key] = list(val)
            elif sec == "tolerance":
                kw.setdefault("tolerance", {})[key] = val
            else:
                kw[key] = val
    cfg = ExperimentConfig(**kw)
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r} at {_where(text, 'run', 'experiment')}")
    if cfg.period <= 0 or cfg.grid_points < 16 or cfg.n < 2:
        raise ConfigError("domain needs period > 0, grid_points >= 16 and n >= 2")
    for key in ("r", "R"):
        for v in cfg.sweep.get(key, ()):
            if not 0 < v <= cfg.period:
                raise ConfigError(f"sweep.{key} value {v} is outside (0, period]")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8", "replace")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, text)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _pmap(fn, cells, threads: int):
    if threads <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, cells))


def _domain(cfg):
    from .waves import TorusDomain
    return TorusDomain(cfg.n, cfg.period, cfg.quad_res or cfg.grid_points)


def _family(cfg, color: str, k: int = 0, count: int | None = None):
    from .families import FamilySpec
    return FamilySpec(cfg.n, cfg.period, cfg.quad_res or cfg.grid_points, color, k,
                      count or cfg.count, cfg.atoms, cfg.min_margin, cfg.dispersion,
                      1.0, 1, cfg.coherent)


def _mock(cfg):
    from .bilinear import low_dispersion_l2_check
    rs = cfg.sweep.get("r", [4, 8, 16, 32])
    fit, vals = low_dispersion_l2_check(rs, trials=cfg.count, seed=cfg.seed,
                                        domain=_domain(cfg), return_values=True)
    rows = [("mock", r, b, float(vals[a, b]), 0.0, cfg.seed)
            for a, r in enumerate(rs) for b in range(cfg.count)]
    return ["experiment", "r", "trial", "value", "err_est", "seed"], rows, fit.slope


def _bluecone(cfg):
    from .bilinear import cone_energy_norms, fit_slope
    from .families import random_wave_family
    Rs = [float(v) for v in cfg.sweep.get("R", [8, 16, 32])]
    fam = random_wave_family(_family(cfg, "red", cfg.k), cfg.seed, "bluecone")
    v = (cfg.period / 2,) * cfg.n + (0.0,)
    side = min(cfg.period, 8 * max(Rs))

    def cell(i):
        return cone_energy_norms([fam[i]], v, Rs, side=side, grid_points=cfg.quad_res)[0]

    norms = _pmap(cell, range(len(fam)), cfg.threads)
    rows = [("bluecone", i, R, float(norms[i][j]), 0.0, cfg.seed)
            for i in range(len(fam)) for j, R in enumerate(Rs)]
    slope = max(fit_slope(Rs, row).slope for row in norms)
    return ["experiment", "wave", "R", "value", "err_est", "seed"], rows, slope


def _doublecone(cfg):
    from .bilinear import doublecone_l1_check
    from .families import random_wave_family
    from .geometry import Cube
    rs = cfg.sweep.get("r", [2, 4, 8])
    R = float(cfg.sweep.get("R", [32])[0])
    reds = random_wave_family(_family(cfg, "red", 0), cfg.seed, "doublecone-red")
    blues = random_wave_family(_family(cfg, "blue", cfg.k), cfg.seed, "doublecone-blue")
    c = (cfg.period / 2,) * cfg.n
    Q = Cube(c, 0.0, R)
    cells = [(i, r) for i in range(len(reds)) for r in rs]

    def cell(ir):
        i, r = ir
        rep, ratio = doublecone_l1_check(reds[i], blues[i], c + (0.0,), float(r), Q,
                                         grid_points=cfg.quad_res)
        return ("doublecone", i, r, R, ratio, rep.err_est, cfg.seed)

    rows = _pmap(cell, cells, cfg.threads)
    return ["experiment", "pair", "r", "R", "value", "err_est", "seed"], rows, None


def _kscaling(cfg):
    from .bilinear import extremizer_pair, fit_slope, product_lp_norm
    from .geometry import Cube
    ks = [int(k) for k in cfg.sweep.get("k", [0, 1, 2, 3, 4])]
    ps = cfg.sweep.get("p", [5 / 3, 2.0])
    dom = _domain(cfg)
    cells = [(p, k) for p in ps for k in ks]

    def cell(pk):
        p, k = pk
        phi, psi, _ = extremizer_pair(k, dom)
        Q = Cube((dom.period / 2,) * dom.n, 0.0, min(2.0 ** k + 8.0, dom.period))
        rep = product_lp_norm(phi, psi, Q, p, dom.grid_points, 0.25)
        return ("kscaling", p, k, rep.value, rep.err_est, cfg.seed)

    rows = _pmap(cell, cells, cfg.threads)
    slopes = [fit_slope([2.0 ** k for k in ks], [r[3] for r in rows if r[1] == p]).slope
              for p in ps]
    return ["experiment", "p", "k", "value", "err_est", "seed"], rows, slopes[0]


def _aratio(cfg):
    from .bilinear import empirical_A_ratio
    from .families import random_wave_family
    from .geometry import Cube
    R = float(cfg.sweep.get("R", [16])[0])
    ps = cfg.sweep.get("p", [5 / 3])
    reds = random_wave_family(_family(cfg, "red", 0), cfg.seed, "aratio-red")
    blues = random_wave_family(_family(cfg, "blue", cfg.k), cfg.seed, "aratio-blue")
    fam = list(zip(reds, blues))
    Q = Cube((cfg.period / 2,) * cfg.n, 0.0, R)

    def cell(p):
        a = empirical_A_ratio(fam, Q, p, cfg.quad_res, min_margin=min(cfg.min_margin, 0.01))
        return ("aratio", p, R, a.value, 0.0, cfg.seed, a.family_hash)

    rows = _pmap(cell, ps, cfg.threads)
    return ["experiment", "p", "R", "value", "err_est", "seed", "family_hash"], rows, None


def _toyscan(cfg):
    from .nullform import toy_scan
    ls = [int(v) for v in cfg.sweep.get("l", [0, 1, 2])]
    ks = [int(v) for v in cfg.sweep.get("k", [0, 1, 2])]
    ps = cfg.sweep.get("p", [5 / 3])
    cells = [(p, l, k) for p in ps for l in ls for k in ks]

    def cell(plk):
        p, l, k = plk
        v = toy_scan([l], [k], p=p)[(l, k)]
        return ("toyscan", p, l, k, v, 0.0, cfg.seed)

    rows = _pmap(cell, cells, cfg.threads)
    base = {p: next((r[4] for r in rows if r[1] == p and r[2] == 0 and r[3] == 0), None)
            for p in ps}
    worst = max((r[4] / base[r[1]] for r in rows if base[r[1]]), default=None)
    return ["experiment", "p", "l", "k", "value", "err_est", "seed"], rows, worst


_DISPATCH = {"mock": _mock, "bluecone": _bluecone, "doublecone": _doublecone,
             "kscaling": _kscaling, "aratio": _aratio, "toyscan": _toyscan}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one experiment; rows come out in sweep order whatever ``threads`` is."""
    t0 = time.perf_counter()
    cols, rows, stat = _DISPATCH[cfg.experiment](cfg)
    verdicts = {}
    tol = cfg.tolerance
    if stat is not None and ("slope_min" in tol or "slope_max" in tol):
        verdicts["slope"] = tol.get("slope_min", -math.inf) <= stat <= tol.get("slope_max", math.inf)
    if "value_max" in tol:
        vi = cols.index("value")
        verdicts["value"] = all(r[vi] <= tol["value_max"] for r in rows)
    return ExperimentResult(cfg.config_hash(), cfg.experiment, cols, rows, verdicts,
                            time.perf_counter() - t0)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(result: ExperimentResult, path=None) -> str:
    """CSV text (floats in shortest round-trip form); written to ``path`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns + ["config_hash"])
    for r in result.rows:
        w.writerow([_cell(v) for v in r] + [result.config_hash])
    text = buf.getvalue()
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def write_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "as_dict"):
        return o.as_dict()
    if isinstance(o, (set, tuple)):
        return list(o)
    return str(o)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
