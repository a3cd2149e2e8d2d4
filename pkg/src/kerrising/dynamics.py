"""Damped network dynamics: master equation, steady state, homodyne records.

The unconditional evolution is the thermal quantum-optics master equation

    drho/dt = -i[H, rho] + sum_i gamma (nbar+1) D[a_i] rho
                          + gamma nbar D[a_i^dag] rho,

with D[c] rho = c rho c^dag - (c^dag c rho + rho c^dag c)/2.  Continuous
unit-efficiency homodyne detection of each output conditions the state on
the measured currents, adding the zero-mean diffusive term

    sqrt(gamma) H[(nbar+1) a_i - nbar a_i^dag] rho dW_i,
    H[c] rho = c rho + rho c^dag - tr(c rho + rho c^dag) rho,

which averages back to the master equation over the Wiener noise; that
average is the main correctness oracle for the integrator.  The measured
current of mode i is J_i = <X_i>_c + sqrt(gamma (2 nbar + 1)) dW_i/dt
with X = (a + a^dag)/sqrt(2).

Integration is Euler-Maruyama with per-step trace renormalization for the
conditional equation and fixed-step RK4 for the master equation; a
compiled kernel specialized to the two-mode network carries the load,
with a generic compiled path for other mode counts or Hamiltonians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import IntegrationError, ShapeError, SteadyStateError
from .hilbert import DensityMatrix, Operator, StateVector, annihilation, embed
from .model import AdjacencyMatrix, ModelParams, network_hamiltonian
from .streams import trajectory_rng

TRACE_DRIFT_TOL = 1e-8        # per-step, before renormalization
STORED_POSITIVITY_TOL = -1e-6  # stored master-equation states


@dataclass(frozen=True)
class EvolutionConfig:
    """Time grid of one integration run."""

    dt: float
    t_final: float
    store_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least one step")
        if self.store_stride < 1:
            raise ValueError("store_stride must be >= 1")
        n = round(self.t_final / self.dt)
        if abs(n * self.dt - self.t_final) > 1e-9 * max(1.0, self.t_final):
            raise ValueError(
                f"t_final {self.t_final} is not an integer number of steps of dt {self.dt}"
            )
        if n % self.store_stride != 0:
            raise ValueError(
                f"{n} steps do not divide into stride-{self.store_stride} windows"
            )

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)

    @property
    def stored_times(self) -> np.ndarray:
        return np.arange(0, self.n_steps + 1, self.store_stride) * self.dt


@dataclass(frozen=True)
class TrajectoryRecord:
    """Stored observables of one conditional homodyne trajectory.

    cond_means_a[k, i] is <a_i>_c at stored time k; cond_means_x the matching
    quadrature average sqrt(2) Re <a_i>_c.  currents[k, i] is the homodyne
    current averaged over the stride window ending at stored step k (the
    first entry, with an empty window, is just <X_i>_c(0)).
    """

    times: np.ndarray
    cond_means_a: np.ndarray
    cond_means_x: np.ndarray
    currents: np.ndarray
    seed: int
    trajectory_id: int
    dt: float
    max_trace_drift: float

    def __post_init__(self):
        n = self.times.shape[0]
        for name in ("cond_means_a", "cond_means_x", "currents"):
            arr = getattr(self, name)
            if arr.shape[0] != n:
                raise ShapeError(f"{name} has {arr.shape[0]} rows for {n} times")
        if self.max_trace_drift > 1e-6:
            raise IntegrationError(
                f"conditional trace drifted by {self.max_trace_drift:.2e} (> 1e-6)"
            )


@dataclass(frozen=True)
class MasterEvolution:
    """Unconditional master-equation states at the stored times."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]


@lru_cache(maxsize=8)
def _mode_ops(cutoffs: tuple[int, ...]):
    """Embedded annihilation operators as CSR, cached per cutoff tuple."""
    return tuple(
        sp.csr_matrix(embed(annihilation(d), i, cutoffs).elements)
        for i, d in enumerate(cutoffs)
    )


def lindblad_rhs(rho, H: Operator, p: ModelParams) -> np.ndarray:
    """Reference master-equation right-hand side (plain matrix algebra).

    Accepts a DensityMatrix or a raw matrix; returns the raw matrix
    d(rho)/dt.  Traceless and Hermiticity-preserving by construction; the
    compiled kernels are tested against this implementation.
    """
    r = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape != H.elements.shape:
        raise ShapeError(f"state shape {r.shape} vs operator {H.elements.shape}")
    if tuple(p.cutoffs) != H.mode_dims:
        raise ShapeError("model cutoffs do not match operator mode dims")
    h = H.elements
    out = -1j * (h @ r - r @ h)
    if p.gamma > 0:
        for a in _mode_ops(p.cutoffs):
            ad = a.conj().T.tocsr()
            x = a @ r
            n_r = ad @ x                     # a^dag a rho
            out += p.gamma * (p.nbar + 1.0) * (
                x @ ad - 0.5 * (n_r + n_r.conj().T)
            )
            if p.nbar > 0:
                y = ad @ r
                m_r = a @ y                  # a a^dag rho
                out += p.gamma * p.nbar * (y @ a - 0.5 * (m_r + m_r.conj().T))
    return out


def liouvillian(H: Operator, p: ModelParams) -> sp.csr_matrix:
    """Vectorized generator L with row-major vec(rho) convention."""
    h = sp.csr_matrix(H.elements)
    dim = h.shape[0]
    eye = sp.identity(dim, format="csr")
    L = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    for a in _mode_ops(p.cutoffs):
        n_op = (a.conj().T @ a).tocsr()
        L = L + p.gamma * (p.nbar + 1.0) * (
            sp.kron(a, a.conj()) - 0.5 * sp.kron(n_op, eye) - 0.5 * sp.kron(eye, n_op.T)
        )
        if p.nbar > 0:
            ad = a.conj().T.tocsr()
            m_op = (a @ ad).tocsr()
            L = L + p.gamma * p.nbar * (
                sp.kron(ad, ad.conj()) - 0.5 * sp.kron(m_op, eye) - 0.5 * sp.kron(eye, m_op.T)
            )
    return L.tocsr()


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

class _Kim2Engine:
    """Two-mode network engine built straight from the model parameters."""

    def __init__(self, p: ModelParams, S: AdjacencyMatrix):
        if p.n_modes != 2 or p.cutoffs[0] != p.cutoffs[1]:
            raise ShapeError("two-mode engine needs two equal cutoffs")
        d = p.cutoffs[0]
        nv = np.arange(d, dtype=float)
        self.d = d
        self.shape4 = (d, d, d, d)
        self.se = np.zeros(d + 2)
        self.se[1:d] = np.sqrt(nv[1:])
        self.c2e = np.zeros(d + 3)
        self.c2e[2:d] = np.sqrt(nv[2:] * (nv[2:] - 1.0))
        diag1 = p.chi * nv * (nv - 1.0) + p.delta * nv
        self.diagH = diag1[:, None] + diag1[None, :] + 2.0 * abs(p.epsilon) ** 2 / p.chi
        self.eps = complex(p.epsilon)
        self.eta_w = float(p.eta * S.entries[0, 1])
        self.gamma = float(p.gamma)
        self.nbar = float(p.nbar)
        # per-mode coefficient grids for <a_i> traces
        self._w1 = self.se[1:d][:, None] * np.ones((1, d))
        self._w2 = np.ones((d, 1)) * self.se[1:d][None, :]

    def as_tensor(self, mat: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(mat.reshape(self.shape4), dtype=complex)

    def as_matrix(self, tens: np.ndarray) -> np.ndarray:
        d = self.d
        return tens.reshape(d * d, d * d)

    def euler_step(self, rho4, out4, dt, dws) -> float:
        return _kernels.kim2_euler_step(
            rho4, out4, self.diagH, self.se, self.c2e, self.eps, self.eta_w,
            dt, self.gamma, self.nbar, dws[0], dws[1]
        )

    def rhs(self, rho4, out4):
        _kernels.kim2_rhs(
            rho4, out4, self.diagH, self.se, self.c2e, self.eps, self.eta_w,
            self.gamma, self.nbar
        )

    def a_expectations(self, rho4) -> np.ndarray:
        """<a_i> = tr(a_i rho) for both modes."""
        z1 = np.einsum("ab,abab->", self._w1, rho4[1:, :, :-1, :])
        z2 = np.einsum("ab,abab->", self._w2, rho4[:, 1:, :, :-1])
        return np.array([z1, z2])


class _GenericEngine:
    """Any mode count / any Hermitian Hamiltonian, CSR-based."""

    def __init__(self, H: Operator, p: ModelParams):
        dims = tuple(p.cutoffs)
        if H.mode_dims != dims:
            raise ShapeError("Hamiltonian mode dims do not match model cutoffs")
        hs = sp.csr_matrix(H.elements)
        ht = sp.csr_matrix(H.elements.T)
        self.hdata = hs.data.astype(np.complex128)
        self.hind = hs.indices.astype(np.int64)
        self.hptr = hs.indptr.astype(np.int64)
        self.htdata = ht.data.astype(np.complex128)
        self.htind = ht.indices.astype(np.int64)
        self.htptr = ht.indptr.astype(np.int64)
        dim = hs.shape[0]
        n = len(dims)
        occ = np.stack(np.unravel_index(np.arange(dim), dims)).T
        self.ntot = occ.sum(axis=1).astype(np.float64)
        self.up = np.zeros((n, dim))
        self.dn = np.zeros((n, dim))
        strides = np.ones(n, dtype=np.int64)
        for i in reversed(range(n - 1)):
            strides[i] = strides[i + 1] * dims[i + 1]
        self.st = strides
        for i in range(n):
            ni = occ[:, i]
            self.up[i] = np.where(ni < dims[i] - 1, np.sqrt(ni + 1.0), 0.0)
            self.dn[i] = np.sqrt(ni.astype(float))
        self.gamma = float(p.gamma)
        self.nbar = float(p.nbar)
        self.dims = dims
        self.dim = dim
        self._hr = np.empty((dim, dim), dtype=complex)

    def as_tensor(self, mat: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(mat, dtype=complex)

    def as_matrix(self, arr: np.ndarray) -> np.ndarray:
        return arr

    def euler_step(self, rho, out, dt, dws) -> float:
        return _kernels.generic_euler_step(
            rho, self._hr, out, self.hdata, self.hind, self.hptr,
            self.up, self.dn, self.st, self.ntot,
            dt, self.gamma, self.nbar, np.asarray(dws, dtype=float)
        )

    def rhs(self, rho, out):
        _kernels.generic_rhs(
            rho, self._hr, out, self.hdata, self.hind, self.hptr,
            self.htdata, self.htind, self.htptr,
            self.up, self.dn, self.st, self.ntot, self.gamma, self.nbar
        )

    def a_expectations(self, rho) -> np.ndarray:
        n = self.up.shape[0]
        out = np.empty(n, dtype=complex)
        for i in range(n):
            si = self.st[i]
            k = np.where(self.up[i] > 0)[0]
            out[i] = np.sum(self.up[i, k] * rho[k + si, k])
        return out


def _make_engine(H: Operator | None, p: ModelParams, graph: AdjacencyMatrix | None):
    if graph is not None and p.n_modes == 2 and p.cutoffs[0] == p.cutoffs[1]:
        return _Kim2Engine(p, graph)
    if H is None:
        if graph is None:
            raise ValueError("need either an explicit Hamiltonian or a coupling graph")
        H = network_hamiltonian(p, graph)
    return _GenericEngine(H, p)


def _initial_matrix(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return np.outer(state.amplitudes, state.amplitudes.conj())
    if isinstance(state, DensityMatrix):
        return state.elements.copy()
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state)}")


def evolve_master(rho0, H: Operator | None, p: ModelParams, cfg: EvolutionConfig,
                  *, graph: AdjacencyMatrix | None = None) -> MasterEvolution:
    """Fixed-step RK4 master-equation integration with trace renormalization.

    Stored states must satisfy the density-matrix invariants; a stored
    eigenvalue below -1e-6 aborts with an instruction to reduce dt.
    """
    engine = _make_engine(H, p, graph)
    rho = engine.as_tensor(_initial_matrix(rho0))
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    tmp = np.empty_like(rho)
    dt = cfg.dt
    dims = tuple(p.cutoffs)
    states = []
    times = cfg.stored_times

    def store(tag):
        mat = engine.as_matrix(rho).copy()
        mat = 0.5 * (mat + mat.conj().T)
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig < STORED_POSITIVITY_TOL:
            raise IntegrationError(
                f"master state positivity violated ({min_eig:.2e}) at t={tag:.4g}; reduce dt"
            )
        if min_eig < -1e-8:
            raise IntegrationError(
                f"stored master state fails the density-matrix floor ({min_eig:.2e}) "
                f"at t={tag:.4g}; reduce dt"
            )
        states.append(DensityMatrix(dims, mat))

    store(0.0)
    for step in range(cfg.n_steps):
        engine.rhs(rho, k1)
        np.multiply(k1, 0.5 * dt, out=tmp)
        tmp += rho
        engine.rhs(tmp, k2)
        np.multiply(k2, 0.5 * dt, out=tmp)
        tmp += rho
        engine.rhs(tmp, k3)
        np.multiply(k3, dt, out=tmp)
        tmp += rho
        engine.rhs(tmp, k4)
        rho += (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        tr = float(np.trace(engine.as_matrix(rho)).real)
        if not math.isfinite(tr) or abs(tr - 1.0) > 1e-3:
            raise IntegrationError(f"master trace diverged at step {step + 1}; reduce dt")
        rho *= 1.0 / tr
        if (step + 1) % cfg.store_stride == 0:
            store((step + 1) * dt)
    return MasterEvolution(times, tuple(states))


def sme_trajectory(rho0, H: Operator | None, p: ModelParams, cfg: EvolutionConfig,
                   *, graph: AdjacencyMatrix | None = None, trajectory_id: int = 0,
                   noise: np.ndarray | None = None, record_states: bool = False):
    """One conditional homodyne trajectory (Euler-Maruyama, renormalized).

    Noise defaults to the (cfg.seed, trajectory_id) Philox stream; an
    explicit (n_steps, n_modes) array of Wiener increments can be injected
    instead, which the step-halving convergence harness uses to compare
    integrations of one and the same Brownian path.

    Returns the TrajectoryRecord, plus the list of stored conditional
    states when record_states is set.
    """
    if p.gamma <= 0:
        raise ValueError("conditional homodyne evolution needs gamma > 0")
    engine = _make_engine(H, p, graph)
    n_steps = cfg.n_steps
    n_modes = p.n_modes
    if noise is None:
        rng = trajectory_rng(cfg.seed, trajectory_id)
        noise = rng.normal(0.0, math.sqrt(cfg.dt), size=(n_steps, n_modes))
    else:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (n_steps, n_modes):
            raise ShapeError(
                f"noise shape {noise.shape}, expected {(n_steps, n_modes)}"
            )
    rho = engine.as_tensor(_initial_matrix(rho0))
    out = np.empty_like(rho)
    stride = cfg.store_stride
    n_stored = n_steps // stride + 1
    means_a = np.empty((n_stored, n_modes), dtype=complex)
    currents = np.empty((n_stored, n_modes))
    curr_coeff = math.sqrt(p.gamma * (2.0 * p.nbar + 1.0))
    states = [] if record_states else None

    a0 = engine.a_expectations(rho)
    means_a[0] = a0
    currents[0] = math.sqrt(2.0) * a0.real
    if record_states:
        states.append(engine.as_matrix(rho).copy())

    max_drift = 0.0
    win_x = np.zeros(n_modes)
    win_dw = np.zeros(n_modes)
    slot = 1
    for step in range(n_steps):
        dws = noise[step]
        win_x += math.sqrt(2.0) * engine.a_expectations(rho).real
        win_dw += dws
        tr = engine.euler_step(rho, out, cfg.dt, dws)
        if not math.isfinite(tr):
            raise IntegrationError(f"conditional state diverged at step {step + 1}")
        drift = abs(tr - 1.0)
        if drift > TRACE_DRIFT_TOL:
            raise IntegrationError(
                f"trace drift {drift:.2e} exceeds {TRACE_DRIFT_TOL:g} at step "
                f"{step + 1}; reduce dt"
            )
        max_drift = max(max_drift, drift)
        rho, out = out, rho
        if (step + 1) % stride == 0:
            a_now = engine.a_expectations(rho)
            means_a[slot] = a_now
            currents[slot] = win_x / stride + curr_coeff * win_dw / (stride * cfg.dt)
            win_x[:] = 0.0
            win_dw[:] = 0.0
            if record_states:
                states.append(engine.as_matrix(rho).copy())
            slot += 1

    record = TrajectoryRecord(
        times=cfg.stored_times,
        cond_means_a=means_a,
        cond_means_x=math.sqrt(2.0) * means_a.real,
        currents=currents,
        seed=cfg.seed,
        trajectory_id=trajectory_id,
        dt=cfg.dt,
        max_trace_drift=max_drift,
    )
    if record_states:
        return record, states
    return record


# ---------------------------------------------------------------------------
# steady state
# ---------------------------------------------------------------------------

def _parity_sector(dims: tuple[int, ...]):
    """Flat vec indices whose total bra+ket photon number is even."""
    occ = np.zeros(1, dtype=np.int64)
    for d in dims:
        occ = (occ[:, None] + np.arange(d)[None, :]).reshape(-1)
    par = (occ[:, None] + occ[None, :]) % 2
    return np.where(par.reshape(-1) == 0)[0]


def steady_state(H: Operator, p: ModelParams, tol: float = 1e-8) -> DensityMatrix:
    """Null state of the vectorized generator, residual-checked.

    Solves the trace-bordered linear system restricted to the even
    photon-parity sector whenever the generator preserves it (the pumped
    network does), via an incomplete-LU-preconditioned Krylov solve with a
    direct sparse LU as fallback; raises SteadyStateError when gamma = 0
    or when the residual ||d(rho)/dt||_F stays above tol.
    """
    if p.gamma <= 0:
        raise SteadyStateError("gamma = 0 has no relaxing steady state")
    L = liouvillian(H, p)
    dim = H.elements.shape[0]
    dims = H.mode_dims
    idx = _parity_sector(dims)
    use_sector = False
    if idx.size < dim * dim:
        rows = L[idx]
        comp = np.setdiff1d(np.arange(dim * dim, dtype=np.int64), idx, assume_unique=False)
        if rows.tocsc()[:, comp].nnz == 0:
            use_sector = True
    if not use_sector:
        idx = np.arange(dim * dim, dtype=np.int64)
        rows = L
    lred = rows.tocsc()[:, idx].tocsc()
    diag_flat = np.arange(dim) * dim + np.arange(dim)
    pos = np.searchsorted(idx, diag_flat)
    if not np.array_equal(idx[pos], diag_flat):
        raise SteadyStateError("trace row leaves the reduced sector")
    ne = idx.size
    weight = float(np.abs(L.diagonal()).mean()) or 1.0
    tr_row = sp.csr_matrix((np.ones(dim), (np.zeros(dim, int), pos)), shape=(1, ne))
    e0 = sp.csr_matrix(
        (np.array([weight]), (np.array([0]), np.array([0]))), shape=(ne, 1)
    )
    bordered = (lred + e0 @ tr_row).tocsc()
    rhs = np.zeros(ne, dtype=complex)
    rhs[0] = weight

    def assemble(x):
        vec = np.zeros(dim * dim, dtype=complex)
        vec[idx] = x
        mat = vec.reshape(dim, dim)
        mat = 0.5 * (mat + mat.conj().T)
        mat /= mat.trace().real
        return mat

    solution = None
    try:
        ilu = spla.spilu(bordered, drop_tol=1e-5, fill_factor=20)
        precond = spla.LinearOperator(bordered.shape, ilu.solve)
        x, info = spla.lgmres(bordered, rhs, M=precond, rtol=1e-13, atol=0.0, maxiter=500)
        if info == 0:
            mat = assemble(x)
            if np.linalg.norm(lindblad_rhs(mat, H, p)) < tol:
                solution = mat
    except RuntimeError:
        pass
    if solution is None:
        lu = spla.splu(bordered)
        mat = assemble(lu.solve(rhs))
        resid = float(np.linalg.norm(lindblad_rhs(mat, H, p)))
        if resid >= tol:
            raise SteadyStateError(
                f"steady-state residual {resid:.2e} above tolerance {tol:g}"
            )
        solution = mat
    # Scrub eigenvalue dust below the density-matrix floor.
    eigvals, eigvecs = np.linalg.eigh(solution)
    if eigvals[0] < -1e-10:
        clipped = np.clip(eigvals, 0.0, None)
        solution = (eigvecs * clipped) @ eigvecs.conj().T
        solution /= solution.trace().real
        if np.linalg.norm(lindblad_rhs(solution, H, p)) >= tol:
            raise SteadyStateError("positivity projection broke the residual tolerance")
    return DensityMatrix(dims, solution)
