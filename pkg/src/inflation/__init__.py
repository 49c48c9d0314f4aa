"""Lowest eigenpairs of sparse symmetric matrices by inflationary dynamics."""
from .core import (
    ConvergenceRecord,
    EigenpairSet,
    MatvecCounter,
    SparseSymMatrix,
    SpectralBounds,
    StateVector,
    Trace,
    canonical_sign,
    gershgorin_bounds,
    matvec,
    normalize,
    rayleigh_quotient,
    residual_measure,
)
from .dynamics import (
    DegenerateSpectrum,
    InflationConfig,
    InflationDiverged,
    ScanFailed,
    choose_timestep,
    estimate_gap_scan,
    inflation_step,
    project_normal_modes,
    random_start,
    run_inflation,
)
from .io import (
    GeneratorSpec,
    MatrixMarketError,
    TraceFormatError,
    generate,
    read_matrix_market,
    read_trace,
    write_matrix_market,
    write_trace,
)
from .subspace import (
    jacobi_dense_eigen,
    multi_inflation,
    orthonormalize,
    periodic_subspace_solve,
    rayleigh_ritz,
    windowed_solve,
)
from .variants import (
    FirstOrderConfig,
    QuarticConfig,
    first_order_descent,
    lanczos_basic,
    power_method,
    quartic_descent,
    quartic_gradient,
)

__version__ = "0.1.0"
