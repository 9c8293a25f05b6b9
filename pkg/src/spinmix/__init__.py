"""Stochastic-trajectory simulator for the spin-mixing dynamics of a small
spin-1 condensate under continuous dispersive monitoring.

Core layers:

* ``fock`` / ``groundstates``: conserved-sector bases, the spin-mixing
  Hamiltonian, exact spectra and analytic ground states.
* ``integrators`` / ``engine``: conditional pure-state and density-matrix
  steppers plus the compiled batch driver.
* ``bloch``: closed two-atom model used as an independent oracle.
* ``ensembles``: reproducible parallel ensembles, photocurrent averaging,
  lab-parameter conversion.
* ``analysis``: spectra, collapse/revival metrics, current smoothing.
* ``service`` / ``cli``: HTTP API wrapping all of the above and the thin
  command-line client.
"""

__version__ = "0.1.0"

from .fock import (  # noqa: F401
    DensityMatrix,
    HamiltonianMatrix,
    SectorBasis,
    SectorError,
    StateVector,
    build_hamiltonian,
    build_sector,
    expectation,
    n0_diagonal,
)
from .groundstates import SpectrumResult, afm_ground_state, fm_ground_manifold, spectrum  # noqa: F401
from .integrators import (  # noqa: F401
    ConfigError,
    IntegratorConfig,
    TrajectoryAbort,
    TrajectoryRecord,
    evolve_density,
    run_trajectory,
    sme_step,
    sse_step,
)
from .noise import NoiseStream  # noqa: F401
from .bloch import BlochState, bloch_step, bloch_vs_sse_check, run_bloch  # noqa: F401
from .ensembles import (  # noqa: F401
    EnsembleResult,
    PhysicalParams,
    average_currents,
    conditional_density_average,
    derive_dimensionless,
    run_ensemble,
    run_trajectories,
    steady_state_distribution,
)
from .analysis import (  # noqa: F401
    SpectrumTrace,
    collapse_revival_metrics,
    fourier_spectrum,
    smooth_current,
    variance_trace,
)
