"""Exact spectra and degenerate ground manifolds of the cavity network.

The pumped network has a 2^N-fold quasi-degenerate ground manifold spanned
by coherent configuration states |alpha0 sigma_1, ..., alpha0 sigma_N>.
A weak coupling eta splits it according to eta alpha^T S alpha, grouping
configurations of equal Ising energy into exactly degenerate subspaces
whose members are cat-like superpositions of the configurations.  The
functions here extract those subspaces from an exact diagonalization and
compare their span with a candidate set of configurations via principal
angles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ShapeError, StateValidationError
from .hilbert import Operator, StateVector, coherent_state, tensor_state
from .model import ModelParams, SpinConfig

HERMITICITY_RTOL = 1e-10
DENSE_DIM_LIMIT = 1600          # use LAPACK eigh up to this dimension
DEFAULT_GROUP_TOL = 1e-6


@dataclass(frozen=True)
class EigenDecomposition:
    """Lowest part of a Hermitian spectrum, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: tuple[StateVector, ...]

    def __post_init__(self):
        vals = np.array(self.eigenvalues, dtype=float, copy=True)
        if np.any(np.diff(vals) < 0):
            raise StateValidationError("eigenvalues must be ascending")
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", tuple(self.eigenvectors))


@dataclass(frozen=True)
class DegenerateSubspace:
    """A group of (near-)degenerate eigenvectors with a common energy.

    ``coefficients`` is filled by :func:`config_overlaps`: entry (n, k) is
    the overlap of the n-th coherent configuration state with the k-th
    basis vector.
    """

    energy: float
    basis: tuple[StateVector, ...]
    coefficients: np.ndarray | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.basis)


def spectrum(H: Operator, k: int) -> EigenDecomposition:
    """k lowest eigenpairs of a Hermitian operator, ascending.

    Dense LAPACK below DENSE_DIM_LIMIT, Lanczos above; Lanczos results are
    residual-checked and fall back to the dense path if they miss
    1e-8 * ||H||.
    """
    mat = H.elements
    dim = mat.shape[0]
    if not 1 <= k <= dim:
        raise ValueError(f"need 1 <= k <= {dim}, got {k}")
    herm_dev = np.max(np.abs(mat - mat.conj().T))
    scale = max(1.0, np.max(np.abs(mat)))
    if herm_dev > HERMITICITY_RTOL * scale:
        raise StateValidationError(
            f"operator not Hermitian (dev {herm_dev:.2e}, scale {scale:.2e})"
        )
    if dim <= DENSE_DIM_LIMIT or k > dim // 4:
        vals, vecs = np.linalg.eigh(mat)
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        vals, vecs = _lanczos_lowest(mat, k, H_norm=scale)
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    states = tuple(StateVector(H.mode_dims, vecs[:, i]) for i in range(k))
    return EigenDecomposition(vals, states)


def _lanczos_lowest(mat: np.ndarray, k: int, H_norm: float):
    smat = sp.csr_matrix(mat)
    try:
        vals, vecs = spla.eigsh(smat, k=k, which="SA")
        resid = np.linalg.norm(smat @ vecs - vecs * vals, axis=0)
        if np.all(resid < 1e-8 * max(1.0, H_norm)):
            return vals, vecs
    except spla.ArpackError:
        pass
    vals, vecs = np.linalg.eigh(mat)
    return vals[:k], vecs[:, :k]


def ground_subspace(decomp: EigenDecomposition, tol: float = DEFAULT_GROUP_TOL) -> DegenerateSubspace:
    """Eigenvectors within tol * max(1, spectral range) of the lowest level."""
    if decomp.eigenvalues.size == 0:
        raise ValueError("empty decomposition")
    vals = decomp.eigenvalues
    spread = float(vals[-1] - vals[0])
    window = tol * max(1.0, spread)
    member = vals - vals[0] <= window
    basis = tuple(v for v, m in zip(decomp.eigenvectors, member) if m)
    energy = float(np.mean(vals[member]))
    return DegenerateSubspace(energy, basis)


def configuration_state(config: SpinConfig, p: ModelParams) -> StateVector:
    """Coherent product state |alpha0 sigma_1, ..., alpha0 sigma_N>."""
    if len(config) != p.n_modes:
        raise ShapeError(f"{len(config)} spins for {p.n_modes}-mode model")
    parts = [
        coherent_state(p.alpha0 * s, d) for s, d in zip(config.spins, p.cutoffs)
    ]
    return tensor_state(parts)


def config_overlaps(
    sub: DegenerateSubspace, configs: list[SpinConfig], p: ModelParams
) -> DegenerateSubspace:
    """Attach the overlap table <config_n | basis_k> to the subspace."""
    table = np.array(
        [
            [np.vdot(configuration_state(c, p).amplitudes, b.amplitudes) for b in sub.basis]
            for c in configs
        ]
    )
    return DegenerateSubspace(sub.energy, sub.basis, table)


def subspace_fidelity(
    sub: DegenerateSubspace, configs: list[SpinConfig], p: ModelParams
) -> float:
    """Span fidelity against the coherent configuration states.

    The configuration states are orthonormalized (they overlap by
    exp(-2|alpha0|^2) per differing spin), then the fidelity is the product
    of squared principal-angle cosines between the two spans, i.e. 1 when
    the spans coincide and ~0 when they are orthogonal.
    """
    if not configs:
        raise ValueError("need at least one configuration")
    u = np.column_stack([b.amplitudes for b in sub.basis])
    raw = np.column_stack([configuration_state(c, p).amplitudes for c in configs])
    v, _ = np.linalg.qr(raw)
    cosines = np.linalg.svd(u.conj().T @ v, compute_uv=False)
    r = min(u.shape[1], v.shape[1])
    # Roundoff can push a cosine marginally above 1.
    cosines = np.clip(cosines[:r], 0.0, 1.0)
    return float(np.prod(cosines**2))


def parity_operator(mode_dims) -> Operator:
    """Total photon parity exp(i pi sum_i n_i); commutes with the network."""
    dims = tuple(int(d) for d in mode_dims)
    total = np.zeros(1)
    for d in dims:
        total = (total[:, None] + np.arange(d)[None, :]).reshape(-1)
    return Operator(dims, np.diag((-1.0) ** total).astype(complex))
