"""Entanglement-free bipartite dynamics: finite-dimensional and 1D continuum tools."""
from .bipartite import (
    BipartiteState,
    HamiltonianDecomposition,
    SchmidtDecomposition,
    UnitaryClass,
    UnitaryTag,
    classify_unitary_2q,
    coupling_coefficient,
    factorise_hamiltonian,
    is_product,
    linear_entropy,
    purity,
    reduced_density,
    schmidt_decompose,
)
from .continuum import (
    Grid1D,
    PotentialSpec,
    PreconditionError,
    TwoParticleWavefunction,
    Wave1D,
    classical_limit_propagate,
    com_separability_check,
    entanglement_entropy,
    evolve,
    hartree_consistency_residual,
    hartree_propagate,
    init_gaussian,
    split_step,
    test_particle_scenario,
)
from .dynamics import (
    EvolutionTrace,
    HamiltonianSchedule,
    MeanFieldState,
    StepSizeError,
    effective_generators,
    fichtre_residual,
    propagate_density,
    propagate_exact,
    propagate_mean_field,
    purity_rate_check,
)
from .kernels import BACKEND
from .numerics import DimensionError, NotHermitianError, hermitian_expm, hs_inner, kron, partial_trace

__version__ = "0.1.0"
