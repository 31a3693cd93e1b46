"""Distance matrices, their admissible sets, universal matrices and matrix distributions."""

from .cone import (DEFAULT_TOLERANCE, Admissibility, DistanceMatrix, ExtremalRay, Interval,
                   Violation, amalgamate, amalgamation_interval, check_matrix, complete_admissible,
                   cut_metric, extend, extremal_rays, geometric_rank, is_admissible, nw_corner,
                   nw_shift, permute, submatrix, validate, zero_classes)
from .errors import CapabilityError, ConeError, ConstraintError, EntryValueError, StructuralError
from .laws import EXP1, DiagonalLaw
from .matdist import (EmpiricalMatrixDistribution, EquivalenceVerdict, LongSample, MetricTriple,
                      ball_measure_estimate, compactness_check, energy_test, equivalence_test,
                      invariance_diagnostics, sample_D, sample_long, tightness_check)
from .polytope import (AdmissiblePolytope, ExactSampler, HitAndRunSampler, contains, decompose,
                       enumerate_vertices, lower_shift, make_sampler, minkowski_check,
                       sample_admissible)
from .random_metrics import RandomMetricConfig, sample_metric, urysohn_genericity_probe
from .universal import (UniversalBuilder, UniversalityReport, build_universal, chi_projection,
                        diagonal_schedule, universality_test, weak_universality_test)

__version__ = "0.1.0"
