"""Simulator for networks of parametrically pumped Kerr cavities.

Each cavity carries a Kerr nonlinearity chi and a two-photon pump epsilon;
a linear beam-splitter network with adjacency matrix S couples the cavities
so that the driven ground manifold mimics an Ising spin system.  The package
covers exact spectra of the closed network, entanglement of ground and
steady states, conditional homodyne trajectories of the damped network, the
semiclassical counterpart with thermal noise, and the ensemble statistics
used to compare the two.

Conventions used throughout (documented once, relied on everywhere):

* hbar = 1; all energies and rates share the units of chi.
* Kronecker ordering: mode 0 is the slowest-varying index.  A basis state
  of an N-mode space with cutoffs (d_0, ..., d_{N-1}) has flat index
  n_0 * (d_1 * ... * d_{N-1}) + ... + n_{N-1}.
* Quadrature X = (a + a^dag) / sqrt(2), so a coherent state alpha has
  <X> = sqrt(2) Re alpha.
"""

from .hilbert import (
    Operator,
    StateVector,
    DensityMatrix,
    annihilation,
    creation,
    coherent_state,
    embed,
    expectation,
    partial_trace,
    partial_transpose,
)
from .model import (
    ModelParams,
    AdjacencyMatrix,
    SpinConfig,
    IsingParams,
    cavity_hamiltonian,
    network_hamiltonian,
    ising_energy,
    perturbed_energy,
    semiclassical_matrix,
    classical_drift,
    drift_jacobian,
    fixed_points,
    bistability_scan,
    default_cutoff,
)
from .spectra import spectrum, ground_subspace, subspace_fidelity
from .entanglement import Bipartition, log_negativity, joint_photon_distribution
from .dynamics import (
    EvolutionConfig,
    TrajectoryRecord,
    lindblad_rhs,
    evolve_master,
    steady_state,
    sme_trajectory,
)
from .classical import ClassicalTrajectory, classical_sde_trajectory
from .stats import (
    EnsembleStats,
    thermal_occupation,
    mean_diff_squared,
    cross_correlation,
    error_probability,
)

__version__ = "0.1.0"
