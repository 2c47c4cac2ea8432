"""Command-line entry point ``conewave``.

Exit codes: 0 success, 1 acceptance or tolerance failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ConewaveError

__all__ = ["main", "build_parser", "parse_kv", "parse_range"]


def parse_kv(text: str) -> dict:
    """``"x=32,32,t=0,r=16"`` -> ``{"x": [32.0, 32.0], "t": [0.0], "r": [16.0]}``."""
    keys = list(re.finditer(r"([A-Za-z_]\w*)\s*=", text))
    if not keys:
        raise ConfigError(f"cannot parse {text!r}; expected key=value pairs")
    out = {}
    for i, m in enumerate(keys):
        end = keys[i + 1].start() if i + 1 < len(keys) else len(text)
        raw = text[m.end():end].strip().strip(",;").strip("()[] ")
        try:
            out[m.group(1)] = [float(v) for v in re.split(r"[,\s:;]+", raw) if v]
        except ValueError:
            raise ConfigError(f"non-numeric value for {m.group(1)!r} in {text!r}") from None
    return out


def parse_range(text: str) -> list[int]:
    """``"0..2"`` -> ``[0, 1, 2]``; ``"0,2"`` -> ``[0, 2]``."""
    m = re.fullmatch(r"\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        return list(range(a, b + 1))
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad integer range {text!r}") from None


def _globals(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=d, help="TOML experiment configuration")
    g.add_argument("--seed", type=int, default=d)
    g.add_argument("--threads", type=int, default=d)
    g.add_argument("--quad-res", type=int, default=d, dest="quad_res",
                   help="grid points per axis for quadrature")
    g.add_argument("--csv", default=d, help="write plot-ready CSV here")
    g.add_argument("--json", default=d, help="write a JSON report here")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conewave", description=__doc__.splitlines()[0],
                                allow_abbrev=False)
    _globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)
    kw = {"allow_abbrev": False}

    s = sub.add_parser("localize", help="project a wave onto a disk", **kw)
    _globals(s, suppress=True)
    s.add_argument("--wave", required=True)
    s.add_argument("--disk", required=True, help='"x=...,t=...,r=..."')
    s.add_argument("--out")
    s.add_argument("--report")
    s.add_argument("--complement", action="store_true")

    s = sub.add_parser("packets", help="wave-packet decomposition", **kw)
    _globals(s, suppress=True)
    s.add_argument("--wave", required=True)
    s.add_argument("--cube", required=True, help='"x=...,t=...,side=..."')
    s.add_argument("--c", type=float, default=0.1)
    s.add_argument("--r", type=float)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--rel", type=float, default=1e-6, help="significance threshold")

    s = sub.add_parser("bilinear", help="bilinear norm experiments", **kw)
    _globals(s, suppress=True)
    s.add_argument("--experiment", choices=["mock", "bluecone", "doublecone", "kscaling", "aratio"])

    s = sub.add_parser("nullform", help="exponent checker and toy scan", **kw)
    _globals(s, suppress=True)
    s.add_argument("--check-exponents", dest="check_exponents", metavar="TUPLE_JSON")
    s.add_argument("--non-strict", action="store_true")
    s.add_argument("--toy-scan", action="store_true", dest="toy_scan")
    s.add_argument("--l", default="0..2")
    s.add_argument("--k", default="0..2")
    s.add_argument("--p", type=float, default=5 / 3)

    s = sub.add_parser("accept", help="run the acceptance suite", **kw)
    _globals(s, suppress=True)
    s.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _config(args):
    from .runner import ExperimentConfig, load_config, with_overrides
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return with_overrides(cfg, seed=args.seed, threads=args.threads, quad_res=args.quad_res,
                          csv=args.csv, json=args.json)


def _localize(args, cfg) -> int:
    from .geometry import Disk
    from .localization import cutoff_report, project_disk
    from .runner import write_json
    from .waves import Wave
    with open(args.wave) as fh:
        wave = Wave.from_json(fh.read())
    d = parse_kv(args.disk)
    try:
        D = Disk(tuple(d["x"]), d["t"][0], d["r"][0])
    except KeyError as exc:
        raise ConfigError(f"--disk needs x, t and r (missing {exc})") from None
    out = project_disk(wave, D, complement=args.complement)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out.to_json())
    rep = cutoff_report(wave, D, grid_points=cfg.quad_res)
    text = write_json(rep.as_dict(), args.report or cfg.json)
    if not (args.report or cfg.json):
        print(text)
    return 0


def _packets(args, cfg) -> int:
    from .geometry import Cube
    from .packets import bessel_check, tube_decompose
    from .runner import write_json
    from .waves import Wave
    with open(args.wave) as fh:
        wave = Wave.from_json(fh.read())
    d = parse_kv(args.cube)
    try:
        Q = Cube(tuple(d["x"]), d["t"][0], d["side"][0])
    except KeyError as exc:
        raise ConfigError(f"--cube needs x, t and side (missing {exc})") from None
    dec = tube_decompose(wave, Q, args.c, r=args.r)
    os.makedirs(args.out, exist_ok=True)
    sig = dec.significant(args.rel)
    energies = dec.energies()
    files = []
    for i in sig:
        T = dec.tubes[i]
        name = f"tube_{i:05d}.json"
        write_json({"tube": T.to_dict(), "direction": dec.direction_of[i],
                    "energy": float(energies[i]), "packet": json.loads(dec.packets[i].to_json())},
                   os.path.join(args.out, name))
        files.append(name)
    index = {
        "cube": Q.to_dict(), "c": dec.c, "r": dec.r, "spacing": dec.spacing,
        "tubes": len(dec), "significant": len(sig), "files": files,
        "reconstruction_residual": dec.reconstruction_error(),
        "dispersion_constant": dec.dispersion_constant(),
        "margin_drop": dec.margin_drop(),
        "bessel_all_ones": bessel_check(dec, np.ones((1, len(dec)))),
    }
    write_json(index, os.path.join(args.out, "index.json"))
    if cfg.json:
        write_json(index, cfg.json)
    print(f"{len(dec)} tubes, {len(sig)} significant, residual {index['reconstruction_residual']:.3g}")
    return 0


def _bilinear(args, cfg) -> int:
    from .runner import run, with_overrides, write_csv, write_json
    if args.experiment:
        cfg = with_overrides(cfg, experiment=args.experiment)
    res = run(cfg)
    text = write_csv(res, cfg.csv)
    if not cfg.csv:
        sys.stdout.write(text)
    if cfg.json:
        write_json({"config_hash": res.config_hash, "experiment": res.experiment,
                    "verdicts": res.verdicts, "seconds": res.seconds,
                    "columns": res.columns, "rows": res.rows}, cfg.json)
    return 0 if res.passed else 1


def _nullform(args, cfg) -> int:
    from .nullform import ExponentTuple, check_exponent_conditions
    from .runner import run, with_overrides, write_csv, write_json
    if not (args.check_exponents or args.toy_scan):
        raise ConfigError("nullform needs --check-exponents or --toy-scan")
    code = 0
    if args.check_exponents:
        with open(args.check_exponents) as fh:
            raw = json.load(fh)
        vals = {k: (Fraction(v) if isinstance(v, str) else v) for k, v in raw.items()}
        try:
            t = ExponentTuple(**vals)
        except TypeError as exc:
            raise ConfigError(f"bad exponent tuple: {exc}") from None
        v = check_exponent_conditions(t, strict=not args.non_strict)
        print(write_json(v.as_dict(), cfg.json))
        code = 0 if v.admissible else 1
    if args.toy_scan:
        cfg = with_overrides(cfg, experiment="toyscan")
        sweep = dict(cfg.sweep, l=parse_range(args.l), k=parse_range(args.k),
                     p=cfg.sweep.get("p", [args.p]))
        from dataclasses import replace
        res = run(replace(cfg, sweep=sweep))
        text = write_csv(res, cfg.csv)
        if not cfg.csv:
            sys.stdout.write(text)
    return code


def _accept(args, cfg) -> int:
    from .acceptance import run_acceptance
    from .runner import write_json
    only = [int(v) for v in args.only.split(",")] if args.only else None
    res = run_acceptance(only, seed=cfg.seed, threads=cfg.threads)
    for r in res:
        print(r.line())
    failed = [r.number for r in res if not r.passed]
    print(f"{len(res) - len(failed)}/{len(res)} criteria passed"
          + (f"; failed: {failed}" if failed else ""))
    if cfg.json:
        write_json([r.as_dict() for r in res], cfg.json)
    if cfg.csv:
        import csv
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["criterion", "name", "passed", "seconds", "measured"])
            for r in res:
                w.writerow([r.number, r.name, r.passed, f"{r.seconds:.3f}",
                            json.dumps(r.measured, sort_keys=True, default=str)])
    return 1 if failed else 0


_COMMANDS = {"localize": _localize, "packets": _packets, "bilinear": _bilinear,
             "nullform": _nullform, "accept": _accept}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConewaveError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
