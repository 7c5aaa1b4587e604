"""Command-line front end.

    python -m delayjsr {model,jsr,bound,synth,repro} [--config FILE] [flags]

Exit codes: 0 ok, 2 config error, 3 unstable / no stabilizing gain,
4 budget exceeded, 5 geometry or polytope-construction failure.
"""
import argparse
import csv
from dataclasses import dataclass, field, fields, replace
import json
import logging
import math
import os
import re
import sys
import warnings
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .bound import BoundOptions, BoundReport, total_bound
from .errors import (BudgetError, ConfigError, DelayJSRError, GeometryError, JSRError,
                     UnstableError, UnsupportedInputError)
from .jsr import JsrOptions, jsr
from .lift import lift
from .model import DelaySet, Gain, Plant, build_error_system
from .synth import SynthOptions, synthesize_and_bound

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_BUDGET = 4
EXIT_GEOMETRY = 5

CSV_HEADER = ["k", "exact_sq_norm", "polytope_sq_norm", "source"]

PAPER_CASES = {
    "a11": dict(a=1.1, gain=(-0.6085, 0.0941), prefix=33.1, polytope=52.2, c=None,
                tail_max=1e-12, vertex_max=500),
    "a15": dict(a=1.5, gain=(-0.9047, 0.1430), prefix=106.9, polytope=163.6, c=90.7,
                tail_max=1e-6, vertex_max=None),
}


@dataclass
class ProblemConfig:
    plant: Plant
    delays: DelaySet
    gain: Optional[Gain] = None
    e0: Optional[np.ndarray] = None
    tau: int = 9
    eta: int = 50
    seed: int = 0
    out: str = "out"
    jsr: JsrOptions = field(default_factory=JsrOptions)
    bound: BoundOptions = field(default_factory=BoundOptions)
    synth: SynthOptions = field(default_factory=SynthOptions)


def _line_of(text, key):
    if text:
        for i, line in enumerate(text.splitlines(), 1):
            if re.match(rf"\s*{re.escape(key)}\s*=", line):
                return i
    return None


def _fail(msg, text=None, key=None):
    line = _line_of(text, key) if key else None
    where = f"line {line}: " if line else ""
    raise ConfigError(f"{where}{msg}")


def _matrix(val, name, text):
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        _fail(f"{name} must be a number or nested numeric array", text, name)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if name == "b" else arr.reshape(1, -1)
    if not np.all(np.isfinite(arr)):
        _fail(f"{name} has non-finite entries", text, name)
    return arr


def _options(cls, table, text, section):
    """Build a frozen options dataclass from a config table, rejecting unknown keys."""
    names = {f.name: f for f in fields(cls)}
    kw = {}
    for key, val in (table or {}).items():
        if key not in names or key in ("jsr", "bound"):
            _fail(f"unknown key '{key}' in [{section}]", text, key)
        default = getattr(cls(), key)
        if isinstance(default, tuple):
            val = tuple(float(v) for v in val)
        elif isinstance(default, bool):
            if not isinstance(val, bool):
                _fail(f"[{section}] {key} must be true or false", text, key)
        elif isinstance(default, int):
            if isinstance(val, bool) or not isinstance(val, int):
                _fail(f"[{section}] {key} must be an integer", text, key)
        elif isinstance(default, float) or default is None:
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                _fail(f"[{section}] {key} must be a finite real", text, key)
            val = float(val)
        kw[key] = val
    return cls(**kw)


def parse_config(data: dict, text: str = None) -> ProblemConfig:
    known = {"seed", "plant", "delays", "gain", "bound", "jsr", "synth", "output"}
    for key in data:
        if key not in known:
            _fail(f"unknown top-level key '{key}'", text, key)
    plant_t = data.get("plant")
    if not isinstance(plant_t, dict) or "a" not in plant_t:
        raise ConfigError("missing [plant] table with key 'a'")
    a = _matrix(plant_t["a"], "a", text)
    b = _matrix(plant_t.get("b", np.ones((a.shape[0], 1))), "b", text)
    try:
        plant = Plant(a, b)
    except ConfigError as exc:
        _fail(str(exc), text, "a")

    delays_t = data.get("delays")
    if not isinstance(delays_t, dict) or "set" not in delays_t:
        raise ConfigError("missing [delays] table with key 'set'")
    try:
        delays = DelaySet(tuple(delays_t["set"]), delays_t.get("d_max"))
    except (ConfigError, TypeError) as exc:
        _fail(str(exc), text, "d_max" if "d_max" in delays_t else "set")

    gain = None
    if "gain" in data:
        vals = data["gain"].get("k")
        if vals is None:
            _fail("[gain] needs key 'k'", text, "gain")
        gain = _gain(vals, plant, delays, text)

    bound_t = dict(data.get("bound", {}))
    tau = bound_t.pop("tau", 9)
    eta = bound_t.pop("eta", 50)
    e0 = bound_t.pop("e0", None)
    for key, val in (("tau", tau), ("eta", eta)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            _fail(f"{key} must be a natural number", text, key)
    if tau > eta:
        _fail(f"tau={tau} exceeds eta={eta}", text, "tau")
    if e0 is not None:
        e0 = np.array(e0, dtype=float).reshape(-1)
        if e0.size != plant.n or not np.all(np.isfinite(e0)):
            _fail(f"e0 must hold {plant.n} finite reals", text, "e0")
    jopts = _options(JsrOptions, data.get("jsr"), text, "jsr")
    bopts = replace(_options(BoundOptions, bound_t, text, "bound"), jsr=jopts)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("seed must be an integer", text, "seed")
    sopts = replace(_options(SynthOptions, data.get("synth"), text, "synth"),
                    jsr=jopts, bound=bopts, seed=seed)
    out = data.get("output", {}).get("dir", "out")
    return ProblemConfig(plant, delays, gain, e0, tau, eta, seed, out, jopts, bopts, sopts)


def _gain(vals, plant, delays, text=None):
    if isinstance(vals, str):
        try:
            vals = [float(v) for v in vals.replace(" ", "").split(",") if v]
        except ValueError:
            _fail(f"cannot parse gain {vals!r}", text, "k")
    vals = np.asarray(vals, dtype=float).reshape(-1)
    expect = plant.m * plant.n * (delays.d_max + 1)
    if vals.size != expect or not np.all(np.isfinite(vals)):
        _fail(f"gain needs {expect} finite entries (m*n*(d_max+1)), got {vals.size}", text, "k")
    return Gain.from_flat(vals, plant.n, plant.m)


def load_config(path) -> ProblemConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    text = raw.decode("utf-8", errors="replace")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, text)


def _apply_flags(cfg: ProblemConfig, args) -> ProblemConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.synth = replace(cfg.synth, seed=args.seed)
    if getattr(args, "tau", None) is not None:
        cfg.tau = args.tau
    if getattr(args, "eta", None) is not None:
        cfg.eta = args.eta
    if cfg.tau > cfg.eta:
        raise ConfigError(f"tau={cfg.tau} exceeds eta={cfg.eta}")
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "strict_paper_alpha", False):
        cfg.bound = replace(cfg.bound, strict_paper_alpha=True)
        cfg.synth = replace(cfg.synth, bound=cfg.bound)
    if getattr(args, "gain", None):
        cfg.gain = _gain(args.gain, cfg.plant, cfg.delays)
    return cfg


def _require_gain(cfg):
    if cfg.gain is None:
        raise ConfigError("no gain given: add [gain] k = [...] or pass --gain")
    return cfg.gain


def _fmt(x):
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_series_csv(path, report: BoundReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.series:
            exact = "" if r.exact_sq_norm is None else _fmt(r.exact_sq_norm)
            w.writerow([r.k, exact, _fmt(r.polytope_sq_norm), r.source])


def read_series_csv(path):
    """Rows as (k, exact or None, polytope, source)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {rows[0]}")
    return [(int(k), float(e) if e else None, float(p), s) for k, e, p, s in rows[1:]]


def totals_from_csv(path, tail, normalization):
    """Recompute (prefix, polytope, total) from a series CSV and the tail term."""
    rows = read_series_csv(path)
    prefix = sum(e for _, e, _, s in rows if s == "prefix")
    poly = sum(p for _, _, p, s in rows if s == "polytope")
    return prefix, poly, (prefix + poly + tail) / normalization


def report_dict(cfg: ProblemConfig, report: BoundReport):
    d = report.to_dict()
    d.update(seed=cfg.seed, gain=cfg.gain.flat().tolist() if cfg.gain is not None else None,
             delays=list(cfg.delays.delays), a_p=cfg.plant.a_p.tolist(),
             b_p=cfg.plant.b_p.tolist(), strict_paper_alpha=cfg.bound.strict_paper_alpha,
             cumulative=cfg.bound.cumulative)
    return d


# commands

def cmd_model(cfg: ProblemConfig, out=None):
    out = out or sys.stdout
    gain = cfg.gain if cfg.gain is not None else Gain.zeros(cfg.delays, cfg.plant.n, cfg.plant.m)
    system = build_error_system(cfg.plant, cfg.delays, gain)
    np.set_printoptions(precision=6, suppress=True)
    print(f"plant n={cfg.plant.n} m={cfg.plant.m}  D={list(cfg.delays.delays)}  "
          f"d_max={cfg.delays.d_max}", file=out)
    print(f"gain K = {gain.flat().tolist()}", file=out)
    print(f"error state dimension {system.dim}; {len(system.words)} matrices", file=out)
    for w in system.words:
        print(f"N{list(w)} =", file=out)
        print(np.array2string(system.matrices[w], prefix="  "), file=out)
    edges = [(w, v) for w in system.words for v in system.graph[w]]
    print(f"admissibility graph: {len(edges)} edges", file=out)
    for w, v in edges:
        print(f"  {list(w)} -> {list(v)}", file=out)
    return EXIT_OK


def cmd_jsr(cfg: ProblemConfig, out=None):
    out = out or sys.stdout
    lifted = lift(build_error_system(cfg.plant, cfg.delays, _require_gain(cfg)))
    est = jsr(lifted, cfg.jsr)
    d = dict(lower=est.lower, upper=est.upper, certified=est.certified, rate=est.rate,
             method=est.method, candidate_word=list(est.candidate_word),
             vertices=est.vertex_count, sweeps=est.sweeps)
    print(json.dumps(_jsonable(d), sort_keys=True), file=out)
    return EXIT_OK


def cmd_bound(cfg: ProblemConfig, out=None):
    out = out or sys.stdout
    report = total_bound(cfg.plant, cfg.delays, _require_gain(cfg), cfg.e0, cfg.tau, cfg.eta,
                         cfg.bound)
    os.makedirs(cfg.out, exist_ok=True)
    write_json(os.path.join(cfg.out, "report.json"), report_dict(cfg, report))
    write_series_csv(os.path.join(cfg.out, "series.csv"), report)
    print(f"prefix {report.term_prefix:.6g}  polytope {report.term_polytope:.6g}  "
          f"tail {report.term_tail:.3g}  total {report.total:.6g}  "
          f"(rho in [{report.rho_lower:.6g}, {report.rho_upper:.6g}], C={report.equivalence.c:.4g})",
          file=out)
    return EXIT_OK


def cmd_synth(cfg: ProblemConfig, out=None):
    out = out or sys.stdout
    k_init = cfg.gain if cfg.gain is not None else Gain.zeros(cfg.delays, cfg.plant.n, cfg.plant.m)
    res = synthesize_and_bound(cfg.plant, cfg.delays, k_init, cfg.tau, cfg.eta, cfg.synth, cfg.e0)
    rep = res.bound_report
    d = dict(gain=res.gain.flat().tolist(), rho=res.rho, rho_lower=res.rho_lower,
             certified=res.certified, surrogate=res.surrogate, restarts_used=res.restarts_used,
             seed=cfg.seed, objective_history=[list(h) for h in res.objective_history],
             bound=None if rep is None else rep.to_dict())
    os.makedirs(cfg.out, exist_ok=True)
    write_json(os.path.join(cfg.out, "synth.json"), d)
    if rep is not None:
        write_series_csv(os.path.join(cfg.out, "series.csv"), rep)
    print(f"K = {res.gain.flat().tolist()}  rho = {res.rho:.8g}  total bound = {rep.total:.6g}",
          file=out)
    return EXIT_OK


def _within(value, target, rel):
    return abs(value - target) <= rel * target


def repro_case(name, out_dir, bound_opts=BoundOptions(), tau=9, eta=50):
    spec = PAPER_CASES[name]
    plant, delays = Plant.scalar(spec["a"]), DelaySet((0, 1))
    gain = Gain.from_flat(spec["gain"])
    report = total_bound(plant, delays, gain, None, tau, eta, bound_opts)
    cfg = ProblemConfig(plant, delays, gain, tau=tau, eta=eta, bound=bound_opts)
    write_json(os.path.join(out_dir, f"{name}_report.json"), report_dict(cfg, report))
    write_series_csv(os.path.join(out_dir, f"{name}_series.csv"), report)
    rows = [
        (name, "prefix_term", spec["prefix"], report.term_prefix, "within 20%",
         _within(report.term_prefix, spec["prefix"], 0.20)),
        (name, "polytope_sum_k0_9", spec["polytope"], report.polytope_prefix_sum, "within 25%",
         _within(report.polytope_prefix_sum, spec["polytope"], 0.25)),
        (name, "tail_eta50", spec["tail_max"], report.term_tail, "below",
         report.term_tail < spec["tail_max"]),
        (name, "rho_certified", 1.0, report.rho_upper, "below",
         report.certified and report.rho_upper < 1),
    ]
    if spec["c"] is not None:
        c = report.equivalence.c
        rows.append((name, "equivalence_constant", spec["c"], c, "within factor 3",
                     spec["c"] / 3 <= c <= 3 * spec["c"]))
    if spec["vertex_max"] is not None:
        count = report.vertex_counts[-1][1]
        rows.append((name, "vertices_step_eta", spec["vertex_max"], count, "below",
                     count < spec["vertex_max"]))
    return report, rows


def cmd_repro(out_dir, bound_opts=BoundOptions(), out=None):
    out = out or sys.stdout
    os.makedirs(out_dir, exist_ok=True)
    table = []
    for name in PAPER_CASES:
        _, rows = repro_case(name, out_dir, bound_opts)
        table.extend(rows)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "quantity", "reference", "value", "criterion", "pass"])
        for case, q, ref, val, crit, ok in table:
            w.writerow([case, q, _fmt(ref), _fmt(val), crit, "pass" if ok else "FAIL"])
    for case, q, ref, val, crit, ok in table:
        print(f"{case:4s} {q:22s} ref {ref:<10.4g} got {val:<12.6g} {crit:16s} "
              f"{'pass' if ok else 'FAIL'}", file=out)
    return EXIT_OK


def exit_code(exc) -> int:
    if isinstance(exc, BudgetError):
        return EXIT_BUDGET
    if isinstance(exc, UnstableError):
        return EXIT_UNSTABLE
    if isinstance(exc, (GeometryError, JSRError)):
        return EXIT_GEOMETRY
    if isinstance(exc, (ConfigError, UnsupportedInputError)):
        return EXIT_CONFIG
    return 1


def build_parser():
    p = argparse.ArgumentParser(prog="delayjsr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("model", "jsr", "bound", "synth", "repro"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML problem file")
        s.add_argument("--seed", type=int)
        s.add_argument("--tau", type=int)
        s.add_argument("--eta", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--strict-paper-alpha", action="store_true",
                       help="scale the polytope estimate by alpha^k instead of alpha^(2k)")
        s.add_argument("--gain", help='gain entries, e.g. --gain=-0.6085,0.0941')
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "repro":
            opts = BoundOptions(strict_paper_alpha=args.strict_paper_alpha)
            return cmd_repro(args.out or "repro", opts)
        if not args.config:
            raise ConfigError(f"'{args.command}' needs --config")
        cfg = _apply_flags(load_config(args.config), args)
        cmd = {"model": cmd_model, "jsr": cmd_jsr, "bound": cmd_bound, "synth": cmd_synth}
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return cmd[args.command](cfg)
    except DelayJSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
