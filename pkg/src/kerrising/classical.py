"""Semiclassical baseline: thermal-noise amplitude equations.

The classical counterpart of the conditional quantum evolution is the
Euler-Maruyama integration of

    d alpha_i = drift_i(alpha) dt + sqrt(gamma nbar / 2) (i xi_1 + xi_2) sqrt(dt)

with the damped drift of :func:`kerrising.model.classical_drift` and
independent unit normals xi_1, xi_2 per mode per step, one bath per
cavity.  The conjugate row of the stacked (alpha, alpha^*) system is kept
exactly conjugate by construction.  At nbar = 0 the noise vanishes and a
trajectory started at the origin stays there bit-exactly, which is the
zero-temperature failure mode the quantum model escapes.

The classical homodyne record is j_i(t) = alpha_i + alpha_i^* with no
added white noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ShapeError
from .dynamics import EvolutionConfig
from .model import AdjacencyMatrix, ModelParams, classical_drift
from .streams import trajectory_rng


@dataclass(frozen=True)
class ClassicalTrajectory:
    """Stored amplitudes and currents of one classical run."""

    times: np.ndarray
    alphas: np.ndarray          # (n_stored, n_modes) complex
    currents: np.ndarray        # j_i = 2 Re alpha_i
    seed: int
    trajectory_id: int
    dt: float

    def __post_init__(self):
        n = self.times.shape[0]
        if self.alphas.shape[0] != n or self.currents.shape[0] != n:
            raise ShapeError("series lengths differ from the time grid")
        if not np.all(np.isfinite(self.alphas)):
            raise IntegrationError("classical trajectory contains non-finite amplitudes")


def classical_sde_trajectory(alpha0, p: ModelParams, S: AdjacencyMatrix,
                             cfg: EvolutionConfig, *, trajectory_id: int = 0,
                             noise: np.ndarray | None = None) -> ClassicalTrajectory:
    """Integrate one thermal-noise trajectory from the given amplitudes.

    Noise defaults to the (cfg.seed, trajectory_id) Philox stream and can
    be injected as an (n_steps, 2, n_modes) array of unit normals for
    convergence harnesses.  Divergence beyond 10 |alpha0_pump| + 10 in any
    mode aborts with the offending step index.
    """
    alpha = np.asarray(alpha0, dtype=complex).reshape(-1).copy()
    if alpha.shape[0] != p.n_modes or S.n_modes != p.n_modes:
        raise ShapeError("alpha/graph/model sizes differ")
    n_steps = cfg.n_steps
    amp = math.sqrt(p.gamma * p.nbar / 2.0)
    if amp > 0.0:
        if noise is None:
            rng = trajectory_rng(cfg.seed, trajectory_id)
            noise = rng.standard_normal((n_steps, 2, p.n_modes))
        else:
            noise = np.asarray(noise, dtype=float)
            if noise.shape != (n_steps, 2, p.n_modes):
                raise ShapeError(
                    f"noise shape {noise.shape}, expected {(n_steps, 2, p.n_modes)}"
                )
    sqdt = math.sqrt(cfg.dt)
    bound = 10.0 * abs(p.alpha0) + 10.0
    stride = cfg.store_stride
    n_stored = n_steps // stride + 1
    alphas = np.empty((n_stored, p.n_modes), dtype=complex)
    alphas[0] = alpha
    slot = 1
    for step in range(n_steps):
        alpha += classical_drift(alpha, p, S) * cfg.dt
        if amp > 0.0:
            xi = noise[step]
            alpha += amp * (1j * xi[0] + xi[1]) * sqdt
        if np.max(np.abs(alpha)) > bound:
            raise IntegrationError(
                f"classical amplitude diverged at step {step + 1} "
                f"(|alpha| > {bound:.3g})"
            )
        if (step + 1) % stride == 0:
            alphas[slot] = alpha
            slot += 1
    return ClassicalTrajectory(
        times=cfg.stored_times,
        alphas=alphas,
        currents=2.0 * alphas.real,
        seed=cfg.seed,
        trajectory_id=trajectory_id,
        dt=cfg.dt,
    )
