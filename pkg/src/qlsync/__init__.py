"""Quantum-like state spaces of synchronizing phase-oscillator networks."""

from .errors import (
    ConfigError,
    ConfigWarning,
    ContractError,
    DegenerateStateWarning,
    NumericDivergenceError,
    NumericError,
    ParameterError,
)
from .graph import (
    BiasedGraph,
    BlockIndicator,
    Spectrum,
    block_indicator,
    cartesian_product,
    connect_subgraphs,
    cycle_graph,
    complete_graph,
    disjoint_union_coupled,
    gen_d_regular_random,
    ql_bit,
    ql_product,
    spectral_gap,
    spectrum,
)
from .kuramoto import (
    OscillatorParams,
    PhaseState,
    integrate,
    kuramoto_rhs,
    order_parameter,
    sample_frequencies,
    sample_initial_phases,
)
from .qlstate import (
    DensityMatrix,
    EffectiveState,
    PhaseUnitary,
    accumulate_density,
    emergent_eigenvector,
    offdiag_series,
    project_effective,
    purity,
    transform_adjacency,
)

__version__ = "0.1.0"
