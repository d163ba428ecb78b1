"""Bosonic transport through the flux rhombic lattice between two reservoirs."""

from .lattice import (
    LatticeSpec,
    SiteIndex,
    Sublattice,
    bloch_bands,
    bloch_matrix,
    build_hamiltonian,
    site_index,
)
from .lindblad import (
    CurrentRecord,
    ReservoirParams,
    bond_current,
    phi_sweep,
    propagate,
    reservoir_current,
    spdm_rhs,
    steady_state,
)
from .twa import (
    EnsembleEstimate,
    TwaParams,
    classical_hamiltonian,
    drift,
    estimate_spdm,
    langevin_step,
    stationary_current_twa,
    transient_populations,
)

__version__ = "0.1.0"
