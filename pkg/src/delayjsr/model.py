"""Plant, delay set and gain types; extended open loop and error-only switched system.

Delay words are tuples ``(sigma(k), sigma(k-1), ..., sigma(k-d_max))``, newest
delay first.  The error-only system has state
``eps(k) = [e(k), e(k-1), ..., e(k-2 d_max)]`` and evolves as
``eps(k+1) = N[w(k)] @ eps(k)``.
"""
from dataclasses import dataclass, field
import itertools
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, UnsupportedInputError

Word = Tuple[int, ...]


def _frozen(a, ndim=2):
    arr = np.array(a, dtype=float, ndmin=ndim)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("matrix entries must be finite reals")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Plant:
    a_p: np.ndarray
    b_p: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a_p)
        b = _frozen(self.b_p)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ConfigError(f"A_P must be square, got shape {a.shape}")
        if b.ndim != 2 or b.shape[0] != a.shape[0] or b.shape[1] < 1:
            raise ConfigError(f"B_P must be {a.shape[0]} x m, got shape {b.shape}")
        object.__setattr__(self, "a_p", a)
        object.__setattr__(self, "b_p", b)

    @property
    def n(self) -> int:
        return self.a_p.shape[0]

    @property
    def m(self) -> int:
        return self.b_p.shape[1]

    @classmethod
    def scalar(cls, a, b=1.0):
        return cls([[a]], [[b]])


@dataclass(frozen=True)
class DelaySet:
    delays: Tuple[int, ...]
    d_max: int = None

    def __post_init__(self):
        try:
            ds = tuple(sorted(set(int(d) for d in self.delays)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"delays must be naturals: {self.delays!r}") from exc
        if not ds:
            raise ConfigError("delay set must be nonempty")
        if ds[0] < 0:
            raise ConfigError("delays must be nonnegative")
        d_max = ds[-1] if self.d_max is None else int(self.d_max)
        if d_max != ds[-1]:
            raise ConfigError(f"d_max={d_max} but max(D)={ds[-1]}; d_max must be realized")
        object.__setattr__(self, "delays", ds)
        object.__setattr__(self, "d_max", d_max)

    def __len__(self):
        return len(self.delays)

    def __iter__(self):
        return iter(self.delays)

    def words(self, length=None) -> List[Word]:
        """All words over D of the given length (default d_max + 1), lexicographic."""
        if length is None:
            length = self.d_max + 1
        return list(itertools.product(self.delays, repeat=length))


@dataclass(frozen=True)
class Gain:
    blocks: Tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(_frozen(k) for k in self.blocks)
        if not blocks:
            raise ConfigError("gain needs at least one block")
        shape = blocks[0].shape
        if any(k.shape != shape for k in blocks):
            raise ConfigError("all gain blocks must share the same m x n shape")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_flat(cls, values: Sequence[float], n=1, m=1):
        """Build from ``[K_0 | K_1 | ...]`` given as a flat row-major list."""
        vals = np.asarray(values, dtype=float).reshape(-1)
        if vals.size % (n * m):
            raise ConfigError(f"{vals.size} gain entries do not split into {m}x{n} blocks")
        mat = vals.reshape(m, -1)
        return cls(tuple(mat[:, j * n:(j + 1) * n] for j in range(mat.shape[1] // n)))

    @classmethod
    def zeros(cls, delays: DelaySet, n=1, m=1):
        return cls(tuple(np.zeros((m, n)) for _ in range(delays.d_max + 1)))

    def flat(self) -> np.ndarray:
        return np.hstack(self.blocks).reshape(-1)

    def check(self, plant: Plant, delays: DelaySet):
        if len(self.blocks) != delays.d_max + 1:
            raise ConfigError(
                f"gain has {len(self.blocks)} blocks, expected d_max+1={delays.d_max + 1}")
        if self.blocks[0].shape != (plant.m, plant.n):
            raise ConfigError(
                f"gain blocks are {self.blocks[0].shape}, expected {(plant.m, plant.n)}")


@dataclass(frozen=True)
class ExtendedOpenLoop:
    a_ext: np.ndarray
    b_ext: Dict[int, np.ndarray]


def build_extended(plant: Plant, delays: DelaySet) -> ExtendedOpenLoop:
    """Open-loop plant augmented with the in-flight actuation buffer u_1..u_dmax."""
    n, m, dm = plant.n, plant.m, delays.d_max
    dim = n + m * dm
    a = np.zeros((dim, dim))
    a[:n, :n] = plant.a_p
    if dm > 0:
        a[:n, n:n + m] = plant.b_p
        # shift u_i <- u_{i+1}
        for i in range(dm - 1):
            r = n + i * m
            a[r:r + m, r + m:r + 2 * m] = np.eye(m)
    b_ext = {}
    for s in delays:
        col = np.zeros((dim, m))
        if s == 0:
            col[:n] = plant.b_p
        else:
            r = n + (s - 1) * m
            col[r:r + m] = np.eye(m)
        col.setflags(write=False)
        b_ext[s] = col
    a.setflags(write=False)
    return ExtendedOpenLoop(a, b_ext)


@dataclass(frozen=True)
class SwitchedErrorSystem:
    n: int
    d_max: int
    delays: DelaySet
    words: Tuple[Word, ...]
    matrices: Dict[Word, np.ndarray]
    graph: Dict[Word, Tuple[Word, ...]] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.n * (2 * self.d_max + 1)

    def initial_state(self, e0) -> np.ndarray:
        """eps(0) = [e(0), 0, ..., 0] since e(k) = 0 for k < 0."""
        e0 = np.asarray(e0, dtype=float).reshape(-1)
        if e0.size != self.n:
            raise ConfigError(f"e0 has {e0.size} entries, plant has n={self.n}")
        eps = np.zeros(self.dim)
        eps[:self.n] = e0
        return eps


def successors(words, d_max):
    """Admissible-products digraph: w -> w' iff w'[1:] == w[:-1]."""
    by_suffix = {}
    for w in words:
        by_suffix.setdefault(w[1:], []).append(w)
    return {w: tuple(by_suffix.get(w[:-1], ())) for w in words}


def build_error_system(plant: Plant, delays: DelaySet, gain: Gain) -> SwitchedErrorSystem:
    """The family N indexed by delay words, with its admissibility graph."""
    gain.check(plant, delays)
    if plant.m != 1:
        raise UnsupportedInputError(
            f"the error-only construction supports single-input plants (m=1), got m={plant.m}")
    n, dm = plant.n, delays.d_max
    dim = n * (2 * dm + 1)
    shift = np.zeros((dim, dim))
    shift[n:, :-n] = np.eye(dim - n)
    bk = [plant.b_p @ k for k in gain.blocks]
    words = tuple(delays.words())
    mats = {}
    for w in words:
        mat = shift.copy()
        mat[:n, :n] = plant.a_p
        for i in range(dm + 1):
            if w[i] != i:
                continue
            # command sent at k-i arrives now
            for j in range(dm + 1):
                c = (i + j) * n
                mat[:n, c:c + n] += bk[j]
        mat.setflags(write=False)
        mats[w] = mat
    return SwitchedErrorSystem(n, dm, delays, words, mats, successors(words, dm))


def words_along(sigma, delays: DelaySet, pad=None) -> List[Word]:
    """Delay words w(k) for k = 0..len(sigma)-1.

    Delays at negative times are set to ``pad`` (default min(D)); they never
    influence the trajectory because commands issued before time 0 are zero.
    """
    pad = delays.delays[0] if pad is None else pad
    dm = delays.d_max
    seq = [pad] * dm + [int(s) for s in sigma]
    allowed = set(delays.delays)
    if any(s not in allowed for s in seq):
        raise ConfigError(f"switching sequence leaves the delay set {delays.delays}")
    return [tuple(seq[dm + k - i] for i in range(dm + 1)) for k in range(len(sigma))]


def error_trajectory(system: SwitchedErrorSystem, sigma, e0) -> np.ndarray:
    """Iterate eps(k+1) = N[w(k)] eps(k); rows are eps(0), ..., eps(len(sigma))."""
    eps = system.initial_state(e0)
    out = [eps]
    for w in words_along(sigma, system.delays):
        eps = system.matrices[w] @ eps
        out.append(eps)
    return np.array(out)


def simulate(plant: Plant, delays: DelaySet, gain: Gain, sigma, e0) -> np.ndarray:
    """Direct simulation of plant, actuation buffer and controller.

    Returns the errors ``e(0), ..., e(len(sigma))`` as rows of an array.
    """
    gain.check(plant, delays)
    n, m, dm = plant.n, plant.m, delays.d_max
    e = np.asarray(e0, dtype=float).reshape(-1)
    if e.size != n:
        raise ConfigError(f"e0 has {e.size} entries, plant has n={n}")
    allowed = set(delays.delays)
    u = np.zeros((dm + 1, m))  # u[i] holds u_i; u[0] unused
    hist = [np.zeros(n) for _ in range(dm)]  # e(k-1), ..., e(k-dm)
    out = [e]
    for s in sigma:
        s = int(s)
        if s not in allowed:
            raise ConfigError(f"delay {s} not in {delays.delays}")
        past = [e] + hist
        v = sum(k @ x for k, x in zip(gain.blocks, past))
        e_next = plant.a_p @ e + (plant.b_p @ u[1] if dm > 0 else 0.0)
        if s == 0:
            e_next = e_next + plant.b_p @ v
        u_next = np.zeros_like(u)
        for i in range(1, dm + 1):
            if i < dm:
                u_next[i] = u[i + 1]
            if s == i:
                u_next[i] = u_next[i] + v
        u = u_next
        hist = ([e] + hist)[:dm]
        e = e_next
        out.append(e)
    return np.array(out)
