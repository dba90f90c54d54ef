"""Adaptive isogeometric analysis with hierarchical B-splines.

Galerkin solves of second-order elliptic problems on NURBS-mapped domains,
residual a posteriori error estimation, Doerfler marking and admissible
hierarchical mesh refinement.
"""

from .adaptivity import (AdaptiveState, StopRule, adaptive_loop, doerfler_mark,
                         fit_rate)
from .assembly import (GalerkinSystem, PDEProblem, assemble, dump_system,
                       energy_error, solve)
from .benchmarks import Benchmark, problem_library, write_history_csv
from .errors import AssemblyError, ConfigError, InvalidInputError, SolverError
from .estimator import ElementIndicators, Facet, dump_indicators, estimate, facets
from .geometry import GeometryMap, benchmark_geometry, load_geometry, save_geometry
from .hierbasis import (HierarchicalBasis, HierBasisFunction, TruncatedFunction,
                        boundary_basis, eval_hier, hierarchical_basis, truncate)
from .hiermesh import (ActiveElement, HierarchicalMesh, bad_neighbors,
                       element_size, initial_mesh, is_admissible, neighbors,
                       overlay, patch, refine)
from .projector import DualFunctional, apply_dual, build_dual, project
from .splines import (KnotVector, TensorBSplineIndex, TensorKnotVector,
                      eval_tensor, eval_univariate, refine_level, two_scale)

__version__ = "0.1.0"
