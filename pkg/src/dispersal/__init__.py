"""Numerical experiments on maximal estimates for dispersive propagators e^{itP(D)}."""

from .continuum import RectangleSet, continuum_evolve, rasterize
from .decompose import DyadicPiece, SectorPiece, dyadic_split, sector_split
from .experiments import (
    ExperimentRecord,
    RegularityProfile,
    growth_experiment,
    load_record,
    positive_direction_experiment,
    rate_experiment,
    save_record,
    smoothing_experiment,
    transfer_experiment,
)
from .extremals import bourgain_datum, bourgain_search, pm_datum, pm_witness_check
from .fitting import fit_exponent
from .propagator import (
    TimeGrid,
    evolve_at,
    evolve_field,
    maximal_field,
    perturbation_bound,
    weighted_difference_field,
)
from .spectral_core import (
    BallQuadrature,
    FrequencyLattice,
    SampledField,
    SpectralFunction,
    l2_norm,
    lp_ball_norm,
    make_lattice,
    sobolev_norm,
    synthesize,
    unit_ball,
)
from .symbols import Symbol, evaluate, grad, growth_check, parse_symbol, perturbation_gap

__version__ = "0.1.0"
