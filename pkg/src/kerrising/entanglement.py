"""Logarithmic negativity and joint photon statistics.

Entanglement across a mode bipartition is quantified by
log2 ||rho^{T_A}||_1 = log2(2 N + 1), where the negativity N is the
absolute sum of the negative eigenvalues of the partial transpose.  The
measure is basis independent, applies equally to the pure ground states
and to damped steady states, and vanishes exactly on product states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DensityMatrix, StateVector, partial_transpose_matrix

# Eigenvalues of the partial transpose in (-NEGATIVITY_FLOOR, 0) are
# truncation noise, not entanglement, and are treated as zero.
NEGATIVITY_FLOOR = 1e-10
LN_CLAMP = 1e-12


@dataclass(frozen=True)
class Bipartition:
    """Disjoint cover of the modes into sides A and B."""

    side_a: tuple[int, ...]
    side_b: tuple[int, ...]

    def __post_init__(self):
        a = tuple(sorted({int(m) for m in self.side_a}))
        b = tuple(sorted({int(m) for m in self.side_b}))
        if not a or not b:
            raise ValueError("both sides of a bipartition must be nonempty")
        if set(a) & set(b):
            raise ValueError(f"bipartition sides overlap: {a} vs {b}")
        object.__setattr__(self, "side_a", a)
        object.__setattr__(self, "side_b", b)

    @classmethod
    def of_modes(cls, side_a, n_modes: int) -> "Bipartition":
        a = {int(m) for m in side_a}
        return cls(tuple(a), tuple(set(range(n_modes)) - a))


def log_negativity(rho: DensityMatrix, split: Bipartition) -> float:
    """log2(2 N + 1) across the bipartition; clamped to 0 for PPT states."""
    n_modes = len(rho.mode_dims)
    if set(split.side_a) | set(split.side_b) != set(range(n_modes)):
        raise ValueError(
            f"bipartition {split.side_a}|{split.side_b} does not cover modes 0..{n_modes - 1}"
        )
    pt = partial_transpose_matrix(rho.elements, rho.mode_dims, split.side_a)
    eigvals = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    negativity = -float(eigvals[eigvals < -NEGATIVITY_FLOOR].sum())
    trace_norm = 2.0 * negativity + 1.0
    if trace_norm < 1.0 + LN_CLAMP:
        return 0.0
    return float(np.log2(trace_norm))


def joint_photon_distribution(state) -> np.ndarray:
    """P(n1, n2) for a two-mode pure or mixed state; sums to 1."""
    if isinstance(state, StateVector):
        dims = state.mode_dims
        if len(dims) != 2:
            raise ValueError(f"joint distribution needs exactly 2 modes, got {len(dims)}")
        p = np.abs(state.amplitudes.reshape(dims)) ** 2
    elif isinstance(state, DensityMatrix):
        dims = state.mode_dims
        if len(dims) != 2:
            raise ValueError(f"joint distribution needs exactly 2 modes, got {len(dims)}")
        p = np.real(np.diag(state.elements)).reshape(dims)
    else:
        raise TypeError(f"expected StateVector or DensityMatrix, got {type(state)}")
    # A valid state can carry -1e-16-ish diagonal noise; clip it.
    p = np.where((p > -NEGATIVITY_FLOOR) & (p < 0.0), 0.0, p)
    return p


def diagonal_interference_minima(p: np.ndarray, drop: float = 0.5) -> list[int]:
    """Interior indices k where P(k, k) < drop * both diagonal neighbors.

    A smooth (classical-mixture) joint distribution has a unimodal
    diagonal; pronounced dips flag the interference fringes of cat-like
    superpositions.
    """
    diag = np.diagonal(p)
    hits = []
    for k in range(1, diag.size - 1):
        if diag[k] < drop * diag[k - 1] and diag[k] < drop * diag[k + 1]:
            hits.append(k)
    return hits
