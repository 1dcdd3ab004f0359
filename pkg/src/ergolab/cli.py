"""``ergolab`` command-line front end.

Every command writes one artifact (JSON report or CSV series) that embeds
its fully resolved configuration.  ``ergolab replay FILE`` re-runs an
artifact from that embedded configuration.  Exit status: 0 on success, 2 on
invalid input, 3 on numeric failure; errors are printed as JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable

import numpy as np

from . import billiards as bl
from . import estimators as est
from . import hyperbolicity as hyp
from . import scan as sc
from . import srb
from .errors import ErgolabError, InvalidParameter, NumericFailure
from .maps import CATALOG, PrecisionPolicy, System, make_system, orbit, system_from_config
from .phase import CirclePoint, EmpiricalMeasure, IntervalPartition, Observable

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
CSV_CONFIG_PREFIX = "# config: "
_NOT_CONFIG = {"threads", "out", "handler"}

_ALIASES = {"perturbed": "perturbed_expanding", "toral": "toral_automorphism", "rot": "rotation"}


def parse_system(spec: str) -> System:
    """``doubling``, ``perturbed:0.05``, ``rotation:0.618``, ``rotation:0.3,0.7``, ``cat``,
    ``toral:2,1,1,1``, ``henon:1.4,0.3``, ``logistic:3.9`` or a JSON config."""
    spec = spec.strip()
    if spec.startswith("{"):
        return system_from_config(spec)
    name, _, args = spec.partition(":")
    vals = [float(v) for v in args.split(",") if v.strip()]
    family = _ALIASES.get(name, name)
    if family == "cat":
        return make_system("toral_automorphism", matrix=[[2, 1], [1, 1]])
    if family == "rotation":
        alpha = (math.sqrt(5) - 1) / 2 if not vals else (vals[0] if len(vals) == 1 else vals)
        return make_system("rotation", alpha=alpha)
    if family == "perturbed_expanding":
        return make_system(family, **({"epsilon": vals[0]} if vals else {}))
    if family == "toral_automorphism":
        if len(vals) != 4:
            raise InvalidParameter("toral automorphism needs four entries a,b,c,d")
        return make_system(family, matrix=[vals[:2], vals[2:]])
    if family == "henon":
        return make_system(family, **dict(zip(("a", "b"), vals)))
    if family == "logistic":
        return make_system(family, **({"t": vals[0]} if vals else {}))
    return make_system(family)


def parse_observable(spec: str) -> Observable:
    """``cos:k``, ``sin:k``, ``const:c`` or ``coord:axis``; append ``@axis`` to pick a torus coordinate."""
    spec = spec.strip()
    if spec.startswith("{"):
        return Observable.from_json(spec)
    body, _, axis = spec.partition("@")
    axis = int(axis) if axis else 0
    kind, _, arg = body.partition(":")
    if kind == "cos":
        return Observable.cos_mode(int(arg or 1), axis)
    if kind == "sin":
        return Observable.sin_mode(int(arg or 1), axis)
    if kind == "const":
        return Observable.constant(float(arg or 1.0))
    if kind in ("coord", "x", "y"):
        return Observable.coordinate(int(arg) if arg else {"x": 0, "y": 1}.get(kind, axis))
    raise InvalidParameter(f"cannot parse observable {spec!r}")


def _floats(text: str, count: int | None = None) -> list[float]:
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    if count is not None and len(vals) != count:
        raise InvalidParameter(f"expected {count} comma-separated numbers, got {text!r}")
    return vals


def _start_point(sys: System, cfg: dict, policy: PrecisionPolicy):
    """Explicit --x0, or a seeded random start in the natural domain."""
    rng = np.random.default_rng(cfg["seed"])
    if cfg.get("x0") is not None:
        vals = _floats(cfg["x0"])
        if sys.dim == 1:
            return CirclePoint.from_real(vals[0], policy.bits) if policy.is_exact else vals[0]
        return np.array(vals[:2])
    if sys.dim == 1:
        if policy.is_exact:
            return CirclePoint.random(rng, policy.bits)
        return float(rng.random())
    if sys.family == "henon":
        return 0.1 * rng.random(2)
    return rng.random(2)


def _policy(cfg: dict) -> PrecisionPolicy:
    return PrecisionPolicy.exact(cfg["bits"]) if cfg.get("precision") == "exact" else PrecisionPolicy.pseudo()


# --------------------------------------------------------------------------
# command handlers: cfg -> ("json", dict) or ("csv", text)
# --------------------------------------------------------------------------


def cmd_birkhoff(cfg, threads):
    sys_ = parse_system(cfg["system"])
    policy = _policy(cfg)
    p = _start_point(sys_, cfg, policy)
    avg = est.birkhoff_average(sys_, parse_observable(cfg["obs"]), p, cfg["n"], policy)
    return "json", {"average": avg, "policy": policy.to_config(), "n": cfg["n"]}


def cmd_discrepancy(cfg, threads):
    sys_ = parse_system(cfg["system"])
    p = _start_point(sys_, cfg, PrecisionPolicy.pseudo())
    seg = orbit(sys_, p, cfg["n"] - 1)
    d = est.equidistribution_discrepancy(seg, IntervalPartition.uniform(cfg["cells"]))
    return "json", {"discrepancy": d, "n": cfg["n"], "cells": cfg["cells"]}


def cmd_density(cfg, threads):
    sys_ = parse_system(cfg["system"])
    grid = IntervalPartition.dyadic(cfg["cells_log2"])
    kind = cfg["kind"]
    if kind == "rho":
        dv = est.pushforward_density(sys_, cfg["n"], grid)
    elif kind == "cesaro":
        dv = est.cesaro_density(sys_, cfg["n"], grid)
    else:
        dv = est.ulam_fixed_density(sys_, grid)
    return "csv", dv.to_csv()


def cmd_distortion(cfg, threads):
    rep = est.empirical_distortion(parse_system(cfg["system"]), cfg["nmax"], cfg["samples"], cfg["seed"])
    out = json.loads(rep.to_json())
    out["pass"] = rep.valid
    return "json", out


def cmd_lyapunov(cfg, threads):
    sys_ = parse_system(cfg["system"])
    policy = _policy(cfg)
    p = _start_point(sys_, cfg, policy)
    e = hyp.lyapunov_spectrum(sys_, p, cfg["n"], policy, cfg.get("transient"))
    out = json.loads(e.to_json())
    out["classification"] = hyp.classify_measure(e)
    return "json", out


def cmd_cone_check(cfg, threads):
    sys_ = parse_system(cfg["system"])
    if cfg.get("center"):
        center = _floats(cfg["center"], 2)
    elif sys_.family == "toral_automorphism":
        center = srb.expanding_direction(sys_.params["matrix"]).tolist()
    else:
        center = [1.0, 0.0]
    cone = hyp.ConeField(tuple(center), math.radians(cfg["half_angle"]))
    rng = np.random.default_rng(cfg["seed"])
    pts = rng.random((cfg["samples"], 2))
    if sys_.family == "henon":
        pts = 0.1 * pts
    rep = hyp.cone_invariance_check(sys_, cone, pts, cfg["steps"])
    rep["failures"] = [list(map(float, f)) for f in rep["failures"]]
    return "json", rep


def cmd_srb(cfg, threads):
    sys_ = parse_system(cfg["system"])
    seg = srb.unstable_segment(sys_, _floats(cfg["base"], 2), cfg["radius"], cfg["samples"])
    grid = srb.default_grid(sys_, cfg["grid_log2"])
    cand = srb.srb_iterate(sys_, seg, cfg["n"], grid)
    out = {"n": cfg["n"], "segment": cand.segment, "escaped": cand.escaped, "total_mass": cand.measure.total}
    if sys_.is_torus_map:
        out["weak_star_distance_to_uniform"] = srb.weak_star_distance(
            cand.measure, EmpiricalMeasure.uniform(grid), cfg["kmax"])
    return "json", out


def cmd_basin(cfg, threads):
    sys_ = parse_system(cfg["system"])
    r = _floats(cfg["region"], 4)
    rep = srb.basin_average(sys_, parse_observable(cfg["obs"]), ((r[0], r[1]), (r[2], r[3])), cfg["n"],
                            cfg["trials"], cfg["seed"], threads)
    return "json", json.loads(rep.to_json())


def cmd_billiard_orbit(cfg, threads):
    table = bl.table_from_spec(cfg["table"])
    o = bl.billiard_orbit(table, bl.BilliardState(cfg["s"], cfg["theta"]), cfg["n"])
    text = o.to_csv()
    if o.singular_stop is not None:
        text += f"# stop: {type(o.singular_stop).__name__} at step {o.stop_step}\n"
    return "csv", text


def cmd_billiard_invariance(cfg, threads):
    table = bl.table_from_spec(cfg["table"])
    rep = bl.invariance_check(table, cfg["samples"], cfg["steps"], cfg["seed"], threads)
    return "json", json.loads(rep.to_json())


def cmd_scan_logistic(cfg, threads):
    res = sc.scan_logistic(cfg["t_min"], cfg["t_max"], cfg["grid"], cfg["n_transient"], cfg["n_measure"],
                           cfg["seed"], threads)
    return "csv", res.to_csv() + f"# positive_fraction: {res.positive_fraction!r}\n"


def cmd_scan_henon(cfg, threads):
    res = sc.scan_henon(cfg["a_min"], cfg["a_max"], cfg["grid"], cfg["b"], cfg["n_transient"],
                        cfg["n_measure"], cfg["seed"], threads)
    return "csv", res.to_csv() + f"# positive_fraction: {res.positive_fraction!r}\n"


def list_systems() -> str:
    lines = ["Map families:"]
    for fam, (params, constraint, topic) in CATALOG.items():
        lines.append(f"  {fam}")
        lines.append(f"    parameters: {params}")
        lines.append(f"    constraint: {constraint}")
        lines.append(f"    topic:      {topic}")
    lines += ["Billiard tables:",
              "  disk             unit circle, focusing, integrable",
              "  square           unit square with four corners",
              "  sinai:r          unit square with a dispersing disk of radius r < 0.5 at its center",
              "  stadium:l,r      two semicircles of radius r joined by segments of length l",
              "Short forms: perturbed:EPS  rotation:ALPHA[,ALPHA2]  cat  toral:a,b,c,d  henon:A,B  logistic:T"]
    return "\n".join(lines) + "\n"


def cmd_list_systems(cfg, threads):
    return "text", list_systems()


# --------------------------------------------------------------------------
# argument parsing and dispatch
# --------------------------------------------------------------------------


def _add(sub, name: str, handler: Callable, help_: str):
    p = sub.add_parser(name, help=help_)
    p.set_defaults(handler=handler)
    if handler is not cmd_list_systems:
        p.add_argument("--seed", type=int, default=0, help="RNG seed (recorded in the artifact)")
        p.add_argument("--threads", type=int, default=None, help="worker cap (default: $ERGOLAB_THREADS or 1)")
        p.add_argument("--out", default=None, help="artifact path (default: stdout)")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergolab", description="Numerical experiments in smooth ergodic theory.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = _add(sub, "birkhoff", cmd_birkhoff, "time average of an observable")
    p.add_argument("--system", required=True)
    p.add_argument("--obs", default="cos:1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--precision", choices=["exact", "pseudo"], default="pseudo")
    p.add_argument("--bits", type=int, default=1024)
    p.add_argument("--x0", default=None)

    p = _add(sub, "discrepancy", cmd_discrepancy, "equidistribution discrepancy of a circle orbit")
    p.add_argument("--system", default="rotation")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--cells", type=int, default=256)
    p.add_argument("--x0", default="0")

    p = _add(sub, "density", cmd_density, "pushforward, Cesaro or Ulam density (CSV)")
    p.add_argument("--system", default="perturbed:0.05")
    p.add_argument("--kind", choices=["rho", "cesaro", "ulam"], default="cesaro")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--cells-log2", type=int, default=10)

    p = _add(sub, "distortion", cmd_distortion, "distortion constant vs observed ratios")
    p.add_argument("--system", default="perturbed:0.05")
    p.add_argument("--nmax", type=int, default=20)
    p.add_argument("--samples", type=int, default=1000)

    p = _add(sub, "lyapunov", cmd_lyapunov, "Lyapunov spectrum and classification")
    p.add_argument("--system", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--transient", type=int, default=None)
    p.add_argument("--precision", choices=["exact", "pseudo"], default="pseudo")
    p.add_argument("--bits", type=int, default=1024)
    p.add_argument("--x0", default=None)

    p = _add(sub, "cone-check", cmd_cone_check, "cone-field invariance on sampled points")
    p.add_argument("--system", default="cat")
    p.add_argument("--center", default=None, help="cone axis cx,cy (default: expanding eigendirection)")
    p.add_argument("--half-angle", type=float, default=30.0, help="degrees")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--steps", type=int, default=1)

    p = _add(sub, "srb", cmd_srb, "Cesaro pushforward of an unstable segment")
    p.add_argument("--system", default="cat")
    p.add_argument("--base", default="0.3,0.7")
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--grid-log2", type=int, default=8)
    p.add_argument("--kmax", type=int, default=4)

    p = _add(sub, "basin", cmd_basin, "Birkhoff averages from random starts in a rectangle")
    p.add_argument("--system", default="henon:1.4,0.3")
    p.add_argument("--obs", default="coord:0")
    p.add_argument("--region", default="0,0.1,0,0.1", help="x_lo,x_hi,y_lo,y_hi")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=32)

    p = _add(sub, "billiard-orbit", cmd_billiard_orbit, "billiard trajectory (CSV)")
    p.add_argument("--table", default="sinai:0.25")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)

    p = _add(sub, "billiard-invariance", cmd_billiard_invariance, "sin(theta) ds dtheta invariance check")
    p.add_argument("--table", default="sinai:0.25")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=8)

    p = _add(sub, "scan-logistic", cmd_scan_logistic, "classify logistic parameters (CSV)")
    p.add_argument("--t-min", type=float, default=3.9)
    p.add_argument("--t-max", type=float, default=4.0)
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--n-transient", type=int, default=10_000)
    p.add_argument("--n-measure", type=int, default=100_000)

    p = _add(sub, "scan-henon", cmd_scan_henon, "classify Henon parameters at fixed b (CSV)")
    p.add_argument("--a-min", type=float, default=1.0)
    p.add_argument("--a-max", type=float, default=1.4)
    p.add_argument("--b", type=float, default=0.3)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--n-transient", type=int, default=10_000)
    p.add_argument("--n-measure", type=int, default=100_000)

    _add(sub, "list-systems", cmd_list_systems, "describe the built-in systems and tables")

    p = sub.add_parser("replay", help="re-run an artifact from its embedded configuration")
    p.add_argument("artifact")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    return ap


HANDLERS = {
    "birkhoff": cmd_birkhoff, "discrepancy": cmd_discrepancy, "density": cmd_density,
    "distortion": cmd_distortion, "lyapunov": cmd_lyapunov, "cone-check": cmd_cone_check,
    "srb": cmd_srb, "basin": cmd_basin, "billiard-orbit": cmd_billiard_orbit,
    "billiard-invariance": cmd_billiard_invariance, "scan-logistic": cmd_scan_logistic,
    "scan-henon": cmd_scan_henon, "list-systems": cmd_list_systems,
}


def _threads(value: int | None) -> int:
    if value is None:
        value = int(os.environ.get("ERGOLAB_THREADS", "1"))
    if value < 1:
        raise InvalidParameter("thread count must be at least 1")
    return value


def read_config(text: str) -> dict:
    """Configuration embedded in a JSON or CSV artifact."""
    if text.startswith(CSV_CONFIG_PREFIX):
        return json.loads(text.splitlines()[0][len(CSV_CONFIG_PREFIX):])
    return json.loads(text)["config"]


def render(cfg: dict, threads: int) -> str:
    """Run the command described by ``cfg`` and return the artifact text."""
    if cfg.get("command") not in HANDLERS:
        raise InvalidParameter(f"unknown command {cfg.get('command')!r}")
    kind, payload = HANDLERS[cfg["command"]](cfg, threads)
    if kind == "text":
        return payload
    if kind == "csv":
        return CSV_CONFIG_PREFIX + json.dumps(cfg, sort_keys=True) + "\n" + payload
    return json.dumps({"config": cfg, "result": payload}, sort_keys=True, indent=1) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
                                sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        threads = _threads(getattr(args, "threads", None))
        if args.command == "replay":
            with open(args.artifact, encoding="utf-8") as fh:
                cfg = read_config(fh.read())
        else:
            cfg = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        _emit(render(cfg, threads), getattr(args, "out", None))
    except NumericFailure as exc:
        return _error(exc, EXIT_NUMERIC)
    except (ErgolabError, ValueError, KeyError, OSError) as exc:
        return _error(exc, EXIT_INVALID)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
