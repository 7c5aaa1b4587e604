"""Markovian lift of the constrained family N to an unconstrained set.

States are the delay words of length d_max.  The lifted matrix of word ``w``
carries ``N[w]`` in block row ``w[:-1]`` and block column ``w[1:]``, so a
product of lifted matrices is nonzero exactly when the underlying word
sequence is a path of the admissibility graph, and then it has a single
nonzero block equal to the constrained product.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .model import SwitchedErrorSystem, Word


@dataclass(frozen=True)
class LiftedSet:
    block: int
    states: Tuple[Word, ...]
    words: Tuple[Word, ...]
    matrices: Dict[Word, np.ndarray]

    @property
    def dim(self) -> int:
        return self.block * len(self.states)

    def state_index(self, state: Word) -> int:
        return self.states.index(tuple(state))

    def matrix_list(self) -> List[np.ndarray]:
        return [self.matrices[w] for w in self.words]

    def block_of(self, mat: np.ndarray, row_state: Word, col_state: Word) -> np.ndarray:
        b = self.block
        r, c = self.state_index(row_state), self.state_index(col_state)
        return mat[r * b:(r + 1) * b, c * b:(c + 1) * b]


def lift(system: SwitchedErrorSystem) -> LiftedSet:
    dm = system.d_max
    states = tuple(system.delays.words(dm))
    index = {s: i for i, s in enumerate(states)}
    b = system.dim
    dim = b * len(states)
    mats = {}
    for w in system.words:
        r, c = index[w[:dm]], index[w[1:]]
        big = np.zeros((dim, dim))
        big[r * b:(r + 1) * b, c * b:(c + 1) * b] = system.matrices[w]
        big.setflags(write=False)
        mats[w] = big
    return LiftedSet(b, states, tuple(system.words), mats)


def lifted_initial_vectors(eps0, lifted: LiftedSet) -> List[np.ndarray]:
    """One lifted copy of ``eps0`` per state block."""
    eps0 = np.asarray(eps0, dtype=float).reshape(-1)
    if eps0.size != lifted.block:
        raise ValueError(f"eps0 has {eps0.size} entries, expected {lifted.block}")
    out = []
    for h in range(len(lifted.states)):
        v = np.zeros(lifted.dim)
        v[h * lifted.block:(h + 1) * lifted.block] = eps0
        out.append(v)
    return out
