"""Spectral and lattice computations for complex structures on noncommutative tori."""

from .algebra import (
    ContextError,
    FourierElement,
    MatrixElement,
    ThetaMatrix,
    derivation,
    gauge_act,
    multiply,
    star,
    trace,
    trace_inner,
)
from .complexstruct import (
    AntiholFrame,
    ComplexStructure,
    ConditioningError,
    MetricG,
    PeriodMatrix,
    antihol_frame,
    block_adapted_frame,
    invariant_metric,
    j_from_period,
    j_from_tau,
    period_from_j,
    standard_j,
)
from .dolbeault import (
    FreeConnection,
    HypothesisError,
    IndexResult,
    NonFlatError,
    SpectralReport,
    TruncationBox,
    cohomology_dims,
    flatness_curvature,
    index,
    kunneth_dims,
    pushforward_connection,
)
from .heisenberg1d import StandardModule1D, hermite_dbar_matrix, standard_module_cohomology
from .ktheory import Decomposable2Form, K0Class, chern_top, curvature_functional, nonalg_certificate
from .riemann import (
    FrobeniusBasis,
    HermitianFormReport,
    IntegerSkewForm,
    decompose_riemann_form,
    detect_block_structure,
    frobenius_basis,
    hermitian_from_form,
    ncriemann_h0_bound,
    riemann_form_search,
    siegel_normalize,
    split_torus_example,
)

__version__ = "0.1.0"
