"""Worst-case L2 error bounds for feedback loops with switching actuation delays.

The closed loop under a delay signal sigma(k) in D is rewritten as a
constrained switched linear system on the error history; its constrained
joint spectral radius, certified with an invariant polytope on a Markovian
lift, gives stability, a cost bound and a target for gain synthesis.
"""
from .bound import BoundOptions, BoundReport, polytope_term, prefix_term, tail_term, total_bound
from .errors import *  # noqa: F401,F403
from .geometry import SymPolytope, contains, dual_vertices, equivalence_constant, polytope_norm, prune
from .jsr import JsrEstimate, JsrOptions, bounds_by_products, extremal_polytope, find_smp_candidate, jsr
from .lift import LiftedSet, lift
from .model import (DelaySet, Gain, Plant, SwitchedErrorSystem, build_error_system,
                    build_extended, error_trajectory, simulate)
from .synth import SynthesisResult, SynthOptions, minimize_rho, synthesize_and_bound

__version__ = "0.1.0"
