"""Evolutions of controls on matrix Lie groups, flows on homogeneous spaces, L1
approximation, bang-bang synthesis and reachable-set exploration."""
from .controls import (FunctionControl, PiecewiseContinuousControl, SampledControl,
                       StaircaseControl, concatenate, concatenate_all, image_points, l1_distance,
                       l1_seminorm, lp_seminorm, reparametrize, restrict, subdivide, value_at)
from .errors import *  # noqa: F401,F403
from .evolution import (EvolutionCurve, continuity_probe, evolution_curve_staircase, evolve,
                        evolve_numeric, evolve_staircase, solution_residual)
from .gmanifold import (GManifold, GroupItself, ManifoldPoint, PlaneUnderSE2,
                        ProductPowerDiagonal, Sphere2UnderSO3, act, caratheodory_residual,
                        cocycle_check, flow, flow_path, fundamental_vector_field, manifold)
from .groups import (HEISENBERG3, SE2, SO3, AlgebraVector, GroupElement, LieGroup, dist, exp,
                     inverse, log, membership_residual, multiply, product_power, rotation,
                     seminorm)
from .reach import ReachabilityCloud, contains_approx, coverage, reachable_explore
from .synthesis import (ControlPolytope, SynthesisReport, approximate_continuous,
                        approximate_staircase, bangbang_pipeline, convex_decompose,
                        trotter_synthesize)

__version__ = "0.1.0"
