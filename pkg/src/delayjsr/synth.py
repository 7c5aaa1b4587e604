"""Gain synthesis: derivative-free minimisation of the joint spectral radius over K.

Each restart runs Nelder-Mead on a cheap product-enumeration surrogate at a
fixed depth.  By default this is the largest averaged spectral radius, a
lower bound that is tight whenever a short product is spectrum-maximising;
the averaged 2-norm (an upper bound) is available but much looser.  Only the
candidate optima are certified with the full :func:`~delayjsr.jsr.jsr`
routine.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .bound import BoundOptions, BoundReport, total_bound
from .errors import BudgetError, JSRError, NoStabilizingGainError
from .jsr import JsrOptions, bounds_by_products, jsr
from .lift import lift
from .model import DelaySet, Gain, Plant, build_error_system

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthOptions:
    restarts: int = 0
    seed: int = 0
    # "spectral": max averaged spectral radius of products (lower bound);
    # "norm": max averaged 2-norm of products (upper bound)
    surrogate_kind: str = "spectral"
    surrogate_depth: int = 8
    max_evals: int = 500
    xatol: float = 1e-6
    initial_edge: float = 0.1
    certify_top: int = 3
    workers: int = 1
    polish: bool = False
    polish_evals: int = 60
    jsr: JsrOptions = JsrOptions()
    bound: BoundOptions = BoundOptions()


@dataclass
class SynthesisResult:
    gain: Gain
    rho: float
    objective_history: List[Tuple[int, float]] = field(default_factory=list)
    restarts_used: int = 0
    bound_report: Optional[BoundReport] = None
    certified: bool = False
    surrogate: float = math.nan
    rho_lower: float = math.nan


def _lifted(plant, delays, flat):
    gain = Gain.from_flat(flat, plant.n, plant.m)
    return lift(build_error_system(plant, delays, gain))


def surrogate(plant, delays, flat, depth=8, kind="spectral"):
    """Product bound on the lifted set; ``inf`` where enumeration fails."""
    if kind not in ("spectral", "norm"):
        raise ValueError(f"unknown surrogate kind {kind!r}")
    try:
        lower, upper = bounds_by_products(_lifted(plant, delays, flat), depth)
    except (BudgetError, np.linalg.LinAlgError):
        return math.inf
    return lower if kind == "spectral" else upper


def _descend(args):
    plant, delays, x0, opts = args
    history = []
    best = [math.inf]

    def fun(x):
        val = surrogate(plant, delays, x, opts.surrogate_depth, opts.surrogate_kind)
        best[0] = min(best[0], val)
        history.append((len(history) + 1, best[0]))
        return val

    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0] + [x0 + opts.initial_edge * e for e in np.eye(x0.size)])
    res = minimize(fun, x0, method="Nelder-Mead",
                   options=dict(initial_simplex=simplex, xatol=opts.xatol, fatol=np.inf,
                                maxfev=opts.max_evals, adaptive=False))
    return np.asarray(res.x, dtype=float), float(res.fun), history


def _certify(plant, delays, flat, opts):
    """(upper, lower, certified) from the full routine, deterministic in ``flat``."""
    try:
        est = jsr(_lifted(plant, delays, flat), opts.jsr)
    except (BudgetError, JSRError) as exc:
        logger.info("certification failed at %s: %s", flat, exc)
        return math.inf, math.nan, False
    return float(est.upper), float(est.lower), bool(est.certified)


def _starts(plant, k_init, opts):
    rng = np.random.default_rng(opts.seed)
    x0 = k_init.flat()
    radius = max(np.max(np.abs(np.linalg.eigvals(plant.a_p))), 0.0) + 1.0
    starts = [x0]
    for _ in range(opts.restarts):
        starts.append(rng.uniform(-radius, radius, size=x0.size))
    return starts


def minimize_rho(plant: Plant, delays: DelaySet, k_init: Gain = None,
                 options: SynthOptions = SynthOptions()) -> SynthesisResult:
    if k_init is None:
        k_init = Gain.zeros(delays, plant.n, plant.m)
    k_init.check(plant, delays)
    opts = options
    starts = _starts(plant, k_init, opts)
    jobs = [(plant, delays, x0, opts) for x0 in starts]
    if opts.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            runs = list(pool.map(_descend, jobs))
    else:
        runs = [_descend(j) for j in jobs]

    history = []
    offset = 0
    for _, _, h in runs:
        history.extend((offset + i, v) for i, v in h)
        offset += len(h)

    # certify the best few distinct optima, plus the starting gain
    order = sorted(range(len(runs)), key=lambda i: (runs[i][1], i))
    picks, seen = [], []
    for i in order:
        x = runs[i][0]
        if not np.isfinite(runs[i][1]):
            continue
        if any(np.max(np.abs(x - y)) < 1e-6 for y in seen):
            continue
        seen.append(x)
        picks.append((x, runs[i][1]))
        if len(picks) >= opts.certify_top:
            break
    x_init = k_init.flat()
    val_init = surrogate(plant, delays, x_init, opts.surrogate_depth, opts.surrogate_kind)
    candidates = [(x_init, val_init)] + picks

    best = None
    for x, val in candidates:
        if val >= 1.0 and best is not None:
            continue
        up, lo, cert = _certify(plant, delays, x, opts)
        key = (up, 0 if cert else 1)
        if best is None or key < best[0]:
            best = (key, x, up, lo, cert, val)
    _, x, up, lo, cert, val = best
    gain = Gain.from_flat(x, plant.n, plant.m)
    if not up < 1.0:
        raise NoStabilizingGainError(
            f"no stabilizing gain found in {len(starts)} starts; best rho estimate {up:.6g} "
            f"(surrogate {min(r[1] for r in runs):.6g})", best_rho=up, best_gain=gain)
    return SynthesisResult(gain, up, history, opts.restarts, None, cert, val, lo)


def synthesize_and_bound(plant: Plant, delays: DelaySet, k_init: Gain = None, tau=9, eta=50,
                         options: SynthOptions = SynthOptions(), eps0=None) -> SynthesisResult:
    res = minimize_rho(plant, delays, k_init, options)
    bopts = replace(options.bound, jsr=options.jsr)
    report = total_bound(plant, delays, res.gain, eps0, tau, eta, bopts)
    if options.polish:
        res, report = _polish(plant, delays, res, report, tau, eta, eps0, bopts, options)
    res.bound_report = report
    return res


def _polish(plant, delays, res, report, tau, eta, eps0, bopts, opts):
    """Second simplex pass on the full bound; keeps the start unless it improves."""
    cache = {}

    def fun(x):
        key = tuple(np.round(x, 12))
        if key not in cache:
            try:
                cache[key] = total_bound(plant, delays, Gain.from_flat(x, plant.n, plant.m),
                                         eps0, tau, eta, bopts)
            except Exception as exc:  # any failure just rejects the point
                logger.info("polish evaluation failed at %s: %s", x, exc)
                cache[key] = None
        rep = cache[key]
        return math.inf if rep is None else rep.total

    x0 = res.gain.flat()
    simplex = np.vstack([x0] + [x0 + 0.01 * e for e in np.eye(x0.size)])
    out = minimize(fun, x0, method="Nelder-Mead",
                   options=dict(initial_simplex=simplex, xatol=1e-4, fatol=np.inf,
                                maxfev=opts.polish_evals))
    rep = cache.get(tuple(np.round(out.x, 12)))
    if rep is None or rep.total >= report.total:
        return res, report
    gain = Gain.from_flat(out.x, plant.n, plant.m)
    new = SynthesisResult(gain, rep.rho_upper, res.objective_history, res.restarts_used,
                          None, rep.certified, res.surrogate, rep.rho_lower)
    return new, rep
