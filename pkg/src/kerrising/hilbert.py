"""Truncated-Fock-space linear algebra.

States and operators live on a composite space of N bosonic modes, each
truncated to d_i levels |0> ... |d_i - 1>.  The Kronecker ordering is fixed
package-wide: mode 0 varies slowest.  Partial trace and partial transpose
rely on that single convention, so every module builds its operators
through :func:`embed` rather than calling ``np.kron`` directly.

Objects are immutable after construction (arrays are marked read-only);
every operation returns a new object, which makes them safe to share
between worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import CutoffError, ShapeError, StateValidationError

# Tail probability mass a truncated coherent state may lose.
COHERENT_TAIL_TOL = 1e-8

HERMITICITY_TOL = 1e-10      # max elementwise |rho - rho^dag|
TRACE_TOL = 1e-9             # |tr(rho) - 1|
POSITIVITY_TOL = -1e-8       # smallest admissible eigenvalue
NORM_TOL = 1e-10             # | ||psi|| - 1 |


def _check_mode_dims(mode_dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in mode_dims)
    if not dims:
        raise ShapeError("need at least one mode")
    for d in dims:
        if d < 2:
            raise CutoffError(f"mode cutoff must be >= 2, got {d}")
    return dims


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Operator:
    """Complex square matrix acting on a composite truncated Fock space."""

    mode_dims: tuple[int, ...]
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _check_mode_dims(self.mode_dims)
        object.__setattr__(self, "mode_dims", dims)
        mat = _as_readonly(self.elements)
        dim = int(np.prod(dims))
        if mat.shape != (dim, dim):
            raise ShapeError(
                f"operator shape {mat.shape} does not match mode dims {dims} "
                f"(expected {dim}x{dim})"
            )
        if not np.all(np.isfinite(mat)):
            raise StateValidationError("operator has non-finite entries")
        object.__setattr__(self, "elements", mat)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.mode_dims, self.elements.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.mode_dims != other.mode_dims:
            raise ShapeError("operator mode dims differ")
        return Operator(self.mode_dims, self.elements @ other.elements)

    def __add__(self, other: "Operator") -> "Operator":
        if self.mode_dims != other.mode_dims:
            raise ShapeError("operator mode dims differ")
        return Operator(self.mode_dims, self.elements + other.elements)

    def __sub__(self, other: "Operator") -> "Operator":
        if self.mode_dims != other.mode_dims:
            raise ShapeError("operator mode dims differ")
        return Operator(self.mode_dims, self.elements - other.elements)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.mode_dims, self.elements * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on a composite truncated Fock space."""

    mode_dims: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _check_mode_dims(self.mode_dims)
        object.__setattr__(self, "mode_dims", dims)
        vec = _as_readonly(self.amplitudes).reshape(-1)
        dim = int(np.prod(dims))
        if vec.shape != (dim,):
            raise ShapeError(
                f"state length {vec.shape[0]} does not match mode dims {dims}"
            )
        nrm = np.linalg.norm(vec)
        if abs(nrm - 1.0) > NORM_TOL:
            raise StateValidationError(f"state norm {nrm!r} deviates from 1")
        object.__setattr__(self, "amplitudes", vec)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.mode_dims, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, (numerically) positive state."""

    mode_dims: tuple[int, ...]
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _check_mode_dims(self.mode_dims)
        object.__setattr__(self, "mode_dims", dims)
        mat = _as_readonly(self.elements)
        dim = int(np.prod(dims))
        if mat.shape != (dim, dim):
            raise ShapeError(
                f"density matrix shape {mat.shape} does not match mode dims {dims}"
            )
        herm_dev = np.max(np.abs(mat - mat.conj().T))
        if herm_dev > HERMITICITY_TOL:
            raise StateValidationError(f"density matrix not Hermitian (dev {herm_dev:.2e})")
        tr = mat.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateValidationError(f"density matrix trace {tr!r} deviates from 1")
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig < POSITIVITY_TOL:
            raise StateValidationError(f"density matrix min eigenvalue {min_eig:.2e} < {POSITIVITY_TOL}")
        object.__setattr__(self, "elements", mat)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]


def annihilation(d: int) -> Operator:
    """Single-mode annihilation operator a on a d-level truncation.

    Entry (n-1, n) is sqrt(n); the top level d-1 is annihilated into d-2,
    so [a, a^dag] deviates from the identity only in the (d-1, d-1) corner.
    """
    if d < 2:
        raise CutoffError(f"annihilation needs cutoff >= 2, got {d}")
    return Operator((d,), np.diag(np.sqrt(np.arange(1.0, d)), k=1))


def creation(d: int) -> Operator:
    """Single-mode creation operator a^dag (adjoint of :func:`annihilation`)."""
    return annihilation(d).dag()


def minimal_coherent_cutoff(amp: complex, tail_tol: float = COHERENT_TAIL_TOL) -> int:
    """Smallest cutoff whose discarded Poisson tail mass is below tail_tol."""
    lam = abs(amp) ** 2
    if lam == 0.0:
        return 2
    d = max(2, int(poisson.isf(tail_tol, lam)))
    # poisson.isf can land one level off; walk to the exact boundary.
    while poisson.sf(d - 1, lam) >= tail_tol:
        d += 1
    while d > 2 and poisson.sf(d - 2, lam) < tail_tol:
        d -= 1
    return d


def coherent_state(amp: complex, d: int) -> StateVector:
    """Truncated coherent state |amp> on d levels, renormalized.

    Raises CutoffError when the truncation would discard more than
    COHERENT_TAIL_TOL of the Poisson photon-number mass; the message names
    the smallest admissible cutoff.
    """
    if d < 2:
        raise CutoffError(f"coherent state needs cutoff >= 2, got {d}")
    lam = abs(amp) ** 2
    tail = float(poisson.sf(d - 1, lam)) if lam > 0 else 0.0
    if tail >= COHERENT_TAIL_TOL:
        raise CutoffError(
            f"cutoff {d} too small for |amp|^2 = {lam:.4g} "
            f"(tail mass {tail:.3g} >= {COHERENT_TAIL_TOL:g}); "
            f"need d >= {minimal_coherent_cutoff(amp)}"
        )
    n = np.arange(d)
    log_mag = n * np.log(abs(amp)) - 0.5 * gammaln(n + 1.0) if lam > 0 else np.where(n == 0, 0.0, -np.inf)
    phase = np.exp(1j * n * np.angle(amp)) if lam > 0 else np.ones(d)
    vec = np.exp(log_mag - 0.5 * lam) * phase
    vec /= np.linalg.norm(vec)
    return StateVector((d,), vec)


def fock_state(occupations, mode_dims) -> StateVector:
    """Product number state |n_0, n_1, ...> on the composite space."""
    dims = _check_mode_dims(mode_dims)
    occ = tuple(int(n) for n in occupations)
    if len(occ) != len(dims):
        raise ShapeError("occupation list length does not match mode count")
    for n, d in zip(occ, dims):
        if not 0 <= n < d:
            raise ShapeError(f"occupation {n} outside cutoff {d}")
    vec = np.zeros(int(np.prod(dims)), dtype=complex)
    vec[np.ravel_multi_index(occ, dims)] = 1.0
    return StateVector(dims, vec)


def vacuum_state(mode_dims) -> StateVector:
    return fock_state([0] * len(tuple(mode_dims)), mode_dims)


def tensor_state(states: list[StateVector]) -> StateVector:
    """Tensor product of single- or multi-mode states, mode 0 slowest."""
    vec = states[0].amplitudes
    dims: tuple[int, ...] = states[0].mode_dims
    for s in states[1:]:
        vec = np.kron(vec, s.amplitudes)
        dims = dims + s.mode_dims
    return StateVector(dims, vec)


def embed(op: Operator, mode_index: int, mode_dims) -> Operator:
    """Lift a single-mode operator to the composite space.

    Returns I x ... x op x ... x I with op in slot mode_index, using the
    package-wide ordering (mode 0 slowest varying).
    """
    dims = _check_mode_dims(mode_dims)
    if not 0 <= mode_index < len(dims):
        raise ShapeError(f"mode index {mode_index} outside 0..{len(dims) - 1}")
    if op.mode_dims != (dims[mode_index],):
        raise ShapeError(
            f"operator dimension {op.mode_dims} does not match slot cutoff "
            f"{dims[mode_index]}"
        )
    left = int(np.prod(dims[:mode_index], dtype=int))
    right = int(np.prod(dims[mode_index + 1:], dtype=int))
    mat = np.kron(np.kron(np.eye(left), op.elements), np.eye(right))
    return Operator(dims, mat)


def expectation(state, op: Operator) -> complex:
    """<psi|op|psi> for a StateVector or tr(op rho) for a DensityMatrix."""
    if isinstance(state, StateVector):
        if state.mode_dims != op.mode_dims:
            raise ShapeError("state and operator mode dims differ")
        return complex(np.vdot(state.amplitudes, op.elements @ state.amplitudes))
    if isinstance(state, DensityMatrix):
        if state.mode_dims != op.mode_dims:
            raise ShapeError("state and operator mode dims differ")
        return complex(np.einsum("ij,ji->", op.elements, state.elements))
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state)}")


def _normalize_mode_set(modes, n_modes: int) -> tuple[int, ...]:
    sel = sorted({int(m) for m in modes})
    if not sel:
        raise ValueError("mode set must be nonempty")
    if sel[0] < 0 or sel[-1] >= n_modes:
        raise ValueError(f"mode set {sel} outside 0..{n_modes - 1}")
    return tuple(sel)


def partial_trace_matrix(mat: np.ndarray, mode_dims, keep) -> np.ndarray:
    """Partial trace of a raw matrix; helper shared with the dynamics code."""
    dims = tuple(mode_dims)
    n = len(dims)
    keep = _normalize_mode_set(keep, n)
    tens = mat.reshape(dims + dims)
    # Bra axis m carries label m; ket axis carries the same label when the
    # mode is traced out (einsum contracts repeated labels) and n + m when kept.
    labels_in = list(range(n)) + [(n + m) if m in keep else m for m in range(n)]
    labels_out = [m for m in keep] + [n + m for m in keep]
    reduced = np.einsum(tens, labels_in, labels_out)
    d_keep = int(np.prod([dims[m] for m in keep]))
    return reduced.reshape(d_keep, d_keep)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced density matrix on the kept modes (sorted ascending)."""
    keep = _normalize_mode_set(keep, len(rho.mode_dims))
    reduced = partial_trace_matrix(rho.elements, rho.mode_dims, keep)
    kept_dims = tuple(rho.mode_dims[m] for m in keep)
    return DensityMatrix(kept_dims, reduced)


def partial_transpose_matrix(mat: np.ndarray, mode_dims, transposed) -> np.ndarray:
    dims = tuple(mode_dims)
    n = len(dims)
    tens = mat.reshape(dims + dims)
    perm = list(range(2 * n))
    for m in transposed:
        perm[m], perm[m + n] = perm[m + n], perm[m]
    return tens.transpose(perm).reshape(mat.shape)


def partial_transpose(rho: DensityMatrix, transposed) -> Operator:
    """Partial transpose over the given modes; Hermitian, trace 1, possibly
    indefinite, hence returned as a plain Operator."""
    n = len(rho.mode_dims)
    sel = _normalize_mode_set(transposed, n)
    if len(sel) == n:
        raise ValueError("transposed set must be a proper subset of the modes")
    return Operator(rho.mode_dims, partial_transpose_matrix(rho.elements, rho.mode_dims, sel))
