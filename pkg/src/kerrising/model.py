"""Kerr-cavity network model: Hamiltonians, Ising energies, semiclassics.

The single-cavity Hamiltonian (hbar = 1, pump frame) is

    H0 = chi (a^dag^2 - eps*/chi)(a^2 - eps/chi) + Delta a^dag a,

whose resonant ground doublet is spanned by the coherent states
|+-alpha0> with alpha0 = sqrt(eps/chi).  A beam-splitter network with
symmetric adjacency matrix S adds the coupling eta a^dag . S . a, which
splits the 2^N-fold degenerate manifold exactly like an Ising model with
spins sigma_i = sign of the cavity amplitude.

The semiclassical limit of the same network is the drift field

    d(alpha_i)/dt = -i (2 chi |alpha_i|^2 alpha_i - 2 eps alpha_i^*
                        + Delta alpha_i + eta (S alpha)_i)
                    - (gamma/2) alpha_i,

whose fixed points away from the origin sit near alpha0 * sigma for the
Ising spin configurations sigma.  Bifurcation of the origin is detected
through the determinant of the drift Jacobian; the trace of the
pump-coupling matrix vanishes identically and carries no information, so
the scan records it only for completeness.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import poisson

from .errors import CutoffError, ShapeError
from .hilbert import (
    COHERENT_TAIL_TOL,
    Operator,
    annihilation,
    embed,
    minimal_coherent_cutoff,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

NEWTON_MAX_ITER = 100
NEWTON_RESIDUAL_TOL = 1e-10
ROOT_MERGE_DISTANCE = 1e-8
MAX_SEED_MODES = 12


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one network, plus per-mode Fock cutoffs."""

    chi: float
    delta: float
    epsilon: complex
    eta: float
    n_modes: int
    cutoffs: tuple[int, ...]
    gamma: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if self.chi <= 0:
            raise ValueError(f"chi must be > 0, got {self.chi}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.nbar < 0:
            raise ValueError(f"nbar must be >= 0, got {self.nbar}")
        if self.n_modes < 1:
            raise ValueError("need at least one mode")
        cut = tuple(int(d) for d in self.cutoffs)
        if len(cut) != self.n_modes:
            raise ShapeError(
                f"{len(cut)} cutoffs for {self.n_modes} modes"
            )
        for d in cut:
            if d < 2:
                raise CutoffError(f"cutoff {d} < 2")
        object.__setattr__(self, "cutoffs", cut)
        object.__setattr__(self, "epsilon", complex(self.epsilon))

    @property
    def alpha0(self) -> complex:
        """Pump-defined coherent amplitude sqrt(eps/chi) (principal branch)."""
        return complex(np.sqrt(self.epsilon / self.chi))

    def with_epsilon(self, eps: complex) -> "ModelParams":
        return replace(self, epsilon=complex(eps))


def default_cutoff(alpha0: complex) -> int:
    """Cutoff rule d = ceil(|alpha0|^2 + 5 sqrt(|alpha0|^2 + 1)).

    Five standard deviations above the Poisson mean keeps the discarded
    coherent tail well below the package tolerances; the result is also
    bumped to the minimal cutoff admitted by the tail-mass check.
    """
    n_mean = abs(alpha0) ** 2
    d = max(2, math.ceil(n_mean + 5.0 * math.sqrt(n_mean + 1.0)))
    return max(d, minimal_coherent_cutoff(alpha0))


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Real symmetric coupling graph with zero diagonal."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.entries, dtype=float, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ShapeError(f"adjacency matrix must be square, got {mat.shape}")
        if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-12:
            raise ValueError("adjacency matrix must be symmetric (tol 1e-12)")
        if np.any(np.diag(mat) != 0.0):
            raise ValueError("adjacency matrix must have zero diagonal")
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @property
    def n_modes(self) -> int:
        return self.entries.shape[0]


def antiferro_pair() -> AdjacencyMatrix:
    """The 2-cavity graph used throughout the examples."""
    return AdjacencyMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))


def load_adjacency(path, n_modes: int | None = None) -> AdjacencyMatrix:
    """Read an edge list: lines "i j weight", 0-indexed, undirected.

    Blank lines and '#' comments are allowed.  A pair listed twice (in
    either order) or a self-loop is rejected, with the offending file and
    line number in the message.
    """
    edges: dict[tuple[int, int], float] = {}
    max_index = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected 'i j weight', got {raw.strip()!r}"
                )
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if i < 0 or j < 0:
                raise ValueError(f"{path}:{lineno}: negative mode index")
            if i == j:
                raise ValueError(f"{path}:{lineno}: self-loop on mode {i}")
            key = (min(i, j), max(i, j))
            if key in edges:
                raise ValueError(
                    f"{path}:{lineno}: duplicate edge {i} {j} (undirected)"
                )
            edges[key] = w
            max_index = max(max_index, i, j)
    n = n_modes if n_modes is not None else max_index + 1
    if n < 1:
        raise ValueError(f"{path}: no edges and no explicit mode count")
    if max_index >= n:
        raise ValueError(f"{path}: edge references mode {max_index} >= n_modes {n}")
    mat = np.zeros((n, n))
    for (i, j), w in edges.items():
        mat[i, j] = w
        mat[j, i] = w
    return AdjacencyMatrix(mat)


@dataclass(frozen=True)
class SpinConfig:
    """Ising configuration, entries +-1."""

    spins: tuple[int, ...]

    def __post_init__(self):
        sp = tuple(int(s) for s in self.spins)
        if not sp or any(s not in (-1, 1) for s in sp):
            raise ValueError(f"spins must be +-1, got {self.spins}")
        object.__setattr__(self, "spins", sp)

    def __len__(self) -> int:
        return len(self.spins)

    def as_array(self) -> np.ndarray:
        return np.array(self.spins, dtype=float)


def all_spin_configs(n: int) -> list[SpinConfig]:
    return [SpinConfig(s) for s in itertools.product((1, -1), repeat=n)]


@dataclass(frozen=True)
class IsingParams:
    """Uniform coupling J, field B, magnetic moment mu."""

    J: float
    B: float = 0.0
    mu: float = 1.0


def _check_cutoff_for_pump(p: ModelParams, mode: int):
    lam = abs(p.alpha0) ** 2
    d = p.cutoffs[mode]
    if lam > 0 and float(poisson.sf(d - 1, lam)) >= COHERENT_TAIL_TOL:
        raise CutoffError(
            f"cutoff {d} on mode {mode} too small for pump amplitude "
            f"|alpha0|^2 = {lam:.4g}; need d >= {minimal_coherent_cutoff(p.alpha0)}"
        )


def cavity_hamiltonian(p: ModelParams, mode: int) -> Operator:
    """Single-cavity Hamiltonian embedded on the given mode.

    chi (a^dag^2 - eps*/chi)(a^2 - eps/chi) + Delta a^dag a.  The factored
    form annihilates |+-alpha0> exactly on resonance, which is why the
    pumped Kerr cavity has a degenerate coherent ground doublet.
    """
    if not 0 <= mode < p.n_modes:
        raise ShapeError(f"mode {mode} outside 0..{p.n_modes - 1}")
    _check_cutoff_for_pump(p, mode)
    d = p.cutoffs[mode]
    a = annihilation(d).elements
    a2 = a @ a
    eye = np.eye(d)
    b = a2 - (p.epsilon / p.chi) * eye
    h = p.chi * (b.conj().T @ b) + p.delta * (a.conj().T @ a)
    return embed(Operator((d,), h), mode, p.cutoffs)


def network_hamiltonian(p: ModelParams, S: AdjacencyMatrix) -> Operator:
    """Full network Hamiltonian: sum of cavities plus eta a^dag . S . a."""
    if S.n_modes != p.n_modes:
        raise ShapeError(
            f"adjacency is {S.n_modes}x{S.n_modes} but model has {p.n_modes} modes"
        )
    dim = int(np.prod(p.cutoffs))
    total = np.zeros((dim, dim), dtype=complex)
    for i in range(p.n_modes):
        total += cavity_hamiltonian(p, i).elements
    if p.eta != 0.0 and p.n_modes > 1:
        ops = [embed(annihilation(p.cutoffs[i]), i, p.cutoffs).elements for i in range(p.n_modes)]
        for i in range(p.n_modes):
            for j in range(i + 1, p.n_modes):
                w = S.entries[i, j]
                if w == 0.0:
                    continue
                hop = ops[i].conj().T @ ops[j]
                total += p.eta * w * (hop + hop.conj().T)
    return Operator(p.cutoffs, total)


def ising_energy(sigma: SpinConfig, ip: IsingParams, S: AdjacencyMatrix) -> float:
    """Classical Ising energy -mu B sum(sigma) - J sigma^T S sigma."""
    if len(sigma) != S.n_modes:
        raise ShapeError(f"{len(sigma)} spins for {S.n_modes}-mode graph")
    s = sigma.as_array()
    return float(-ip.mu * ip.B * s.sum() - ip.J * s @ S.entries @ s)


def perturbed_energy(sigma: SpinConfig, p: ModelParams, S: AdjacencyMatrix) -> float:
    """First-order energy of the coherent configuration alpha0 * sigma.

    N Delta |eps|/chi + eta |eps|/chi sigma^T S sigma.  The amplitude
    prefactor is sqrt(|eps|/chi) per mode, which reproduces the exact
    antiferromagnetic pair splitting -2 eta |eps|/chi of the two-cavity
    network in the high-driving limit.
    """
    if len(sigma) != S.n_modes or S.n_modes != p.n_modes:
        raise ShapeError("spin/graph/model sizes differ")
    s = sigma.as_array()
    scale = abs(p.epsilon) / p.chi
    return float(p.n_modes * p.delta * scale + p.eta * scale * (s @ S.entries @ s))


def semiclassical_matrix(alpha: np.ndarray, p: ModelParams, S: AdjacencyMatrix) -> np.ndarray:
    """Pump-coupling matrix of the linearized semiclassical flow.

    2 eps I_N (x) sigma_x - (Delta I_N + 2 chi diag|alpha_i|^2 + eta S) (x) sigma_z
    on the interleaved vector (alpha_1, alpha_1^*, alpha_2, alpha_2^*, ...).
    Its trace vanishes identically; stability questions are settled by
    :func:`drift_jacobian` instead.
    """
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    if alpha.shape[0] != p.n_modes or S.n_modes != p.n_modes:
        raise ShapeError("alpha/graph/model sizes differ")
    k = p.delta * np.eye(p.n_modes) + 2.0 * p.chi * np.diag(np.abs(alpha) ** 2) + p.eta * S.entries
    return 2.0 * p.epsilon * np.kron(np.eye(p.n_modes), SIGMA_X) - np.kron(k, SIGMA_Z)


def classical_drift(alpha: np.ndarray, p: ModelParams, S: AdjacencyMatrix) -> np.ndarray:
    """Damped semiclassical drift evaluated at the amplitude vector alpha."""
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    if alpha.shape[0] != p.n_modes or S.n_modes != p.n_modes:
        raise ShapeError("alpha/graph/model sizes differ")
    nonlin = 2.0 * p.chi * np.abs(alpha) ** 2 * alpha
    return (
        -1j * (nonlin - 2.0 * p.epsilon * alpha.conj() + p.delta * alpha + p.eta * (S.entries @ alpha))
        - 0.5 * p.gamma * alpha
    )


def drift_jacobian(alpha: np.ndarray, p: ModelParams, S: AdjacencyMatrix) -> np.ndarray:
    """Complex Jacobian of the drift on the stacked vector (alpha, alpha^*).

    Returns the 2N x 2N block matrix [[A, B], [B^*, A^*]] with
    A = d(drift)/d(alpha) and B = d(drift)/d(alpha^*).  Its eigenvalues
    coincide with those of the Jacobian of the real 2N-dimensional vector
    field, so they decide the stability of a fixed point, and its
    determinant is the bifurcation indicator used by the scan.
    """
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    n = p.n_modes
    if alpha.shape[0] != n or S.n_modes != n:
        raise ShapeError("alpha/graph/model sizes differ")
    a_block = (
        -1j * (np.diag(4.0 * p.chi * np.abs(alpha) ** 2 + p.delta) + p.eta * S.entries)
        - 0.5 * p.gamma * np.eye(n)
    )
    b_block = -1j * np.diag(2.0 * p.chi * alpha**2 - 2.0 * p.epsilon)
    top = np.hstack([a_block, b_block])
    bottom = np.hstack([b_block.conj(), a_block.conj()])
    return np.vstack([top, bottom])


def _real_jacobian(alpha: np.ndarray, p: ModelParams, S: AdjacencyMatrix) -> np.ndarray:
    """Jacobian of (Re drift, Im drift) with respect to (Re alpha, Im alpha)."""
    n = p.n_modes
    big = drift_jacobian(alpha, p, S)
    a_block = big[:n, :n]
    b_block = big[:n, n:]
    return np.block(
        [
            [np.real(a_block + b_block), -np.imag(a_block - b_block)],
            [np.imag(a_block + b_block), np.real(a_block - b_block)],
        ]
    )


@dataclass(frozen=True)
class FixedPoint:
    """One root of the drift field with its linear stability flag."""

    alpha: np.ndarray
    stable: bool
    residual: float

    def __post_init__(self):
        a = np.array(self.alpha, dtype=complex, copy=True)
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)


def _newton_root(seed: np.ndarray, p: ModelParams, S: AdjacencyMatrix) -> np.ndarray | None:
    n = p.n_modes
    x = np.concatenate([seed.real, seed.imag])
    for _ in range(NEWTON_MAX_ITER):
        alpha = x[:n] + 1j * x[n:]
        f = classical_drift(alpha, p, S)
        res = np.linalg.norm(f)
        if res < NEWTON_RESIDUAL_TOL:
            return alpha
        fvec = np.concatenate([f.real, f.imag])
        jac = _real_jacobian(alpha, p, S)
        try:
            step = np.linalg.solve(jac, fvec)
        except np.linalg.LinAlgError:
            return None
        # Backtrack while the residual grows; guards divergence from bad seeds.
        scale = 1.0
        for _ in range(30):
            x_new = x - scale * step
            a_new = x_new[:n] + 1j * x_new[n:]
            if np.linalg.norm(classical_drift(a_new, p, S)) < res:
                break
            scale *= 0.5
        else:
            return None
        x = x - scale * step
    alpha = x[:n] + 1j * x[n:]
    if np.linalg.norm(classical_drift(alpha, p, S)) < NEWTON_RESIDUAL_TOL:
        return alpha
    return None


def fixed_points(p: ModelParams, S: AdjacencyMatrix) -> list[FixedPoint]:
    """Newton-refined roots of the drift, seeded from every spin configuration.

    Seeds are the origin and alpha0 * sigma for all 2^N spin vectors sigma
    (N <= 12 guards the exhaustive enumeration).  Converged roots closer
    than 1e-8 are merged; a seed that fails to converge is reported via a
    warning rather than fabricated.
    """
    if p.n_modes > MAX_SEED_MODES:
        raise ValueError(
            f"exhaustive seeding limited to {MAX_SEED_MODES} modes, got {p.n_modes}"
        )
    seeds = [np.zeros(p.n_modes, dtype=complex)]
    seeds += [p.alpha0 * c.as_array() for c in all_spin_configs(p.n_modes)]
    roots: list[np.ndarray] = []
    for seed in seeds:
        root = _newton_root(np.asarray(seed, dtype=complex), p, S)
        if root is None:
            warnings.warn(
                f"Newton did not converge from seed {seed}; root omitted",
                stacklevel=2,
            )
            continue
        if all(np.linalg.norm(root - r) >= ROOT_MERGE_DISTANCE for r in roots):
            roots.append(root)
    out = []
    for root in roots:
        eigvals = np.linalg.eigvals(drift_jacobian(root, p, S))
        stable = bool(np.all(eigvals.real < 0.0))
        out.append(
            FixedPoint(root, stable, float(np.linalg.norm(classical_drift(root, p, S))))
        )
    return out


@dataclass(frozen=True)
class BistabilityScan:
    """Origin-stability scan over a pump grid."""

    epsilons: np.ndarray
    det_origin: np.ndarray
    trace_pump_matrix: np.ndarray
    sign_changes: tuple[tuple[float, float], ...]


def bistability_scan(p: ModelParams, S: AdjacencyMatrix, epsilon_grid) -> BistabilityScan:
    """Determinant of the origin Jacobian across a monotone pump grid.

    Flags every grid interval on which the determinant changes sign; for a
    single undetuned undamped cavity the determinant is -4 eps^2 (never
    changes sign for eps > 0) while a detuning Delta moves the bifurcation
    to det = Delta^2 + gamma^2/4 - 4 eps^2 = 0.  The trace of the
    semiclassical pump-coupling matrix is recorded too, but it vanishes
    identically and cannot flag anything.
    """
    grid = np.asarray(list(epsilon_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("epsilon grid must be nonempty")
    diffs = np.diff(grid)
    if grid.size > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("epsilon grid must be strictly monotone")
    origin = np.zeros(p.n_modes, dtype=complex)
    dets = np.empty(grid.size)
    traces = np.empty(grid.size)
    for k, eps in enumerate(grid):
        pk = p.with_epsilon(eps)
        det = np.linalg.det(drift_jacobian(origin, pk, S))
        dets[k] = det.real
        traces[k] = float(np.trace(semiclassical_matrix(origin, pk, S)).real)
    changes = []
    for k in range(grid.size - 1):
        if dets[k] * dets[k + 1] < 0.0:
            changes.append((float(grid[k]), float(grid[k + 1])))
    dets.setflags(write=False)
    traces.setflags(write=False)
    g = grid.copy()
    g.setflags(write=False)
    return BistabilityScan(g, dets, traces, tuple(changes))
