"""Weak KAM toolkit for contact Hamiltonian systems on the circle."""

from .expr import (ExprDomainError, ExprNameError, ExprSyntaxError,
                   differentiate, evaluate, parse_expression, serialize)
from .geometry import (PeriodicGrid, PseudographSample, ScalarField,
                       interpolate, mollify, periodic_distance,
                       pseudograph_sample, wrap_angle)
from .model import (ContactModel, LegendreError, SubsolutionReport,
                    halfsine_subsolution_ex63, strict_subsolution_ex63,
                    subsolution_check)
from .flow import (BlowUpError, FixedPointInfo, Orbit, cubic_roots,
                   energy_transport_residual, find_fixed_points,
                   integrate_orbit, jacobian_fd, jacobian_rate_ordered,
                   linearize_fixed_point, phase_distance,
                   trace_invariant_manifold, vector_field)
from .variational import (ActionTable, DiscreteCurve, LaxParams,
                          WeakKamResult, action_table, backtrack_minimizer,
                          evolve_with_backpointers, lax_step,
                          lax_step_with_info, semigroup_evolve,
                          weak_kam_limit)
from .asymptotic import (BusemannResult, CharacteristicOrbit,
                         ClassificationReport, ClusteringError,
                         HeteroclinicResult, MinimalityReport,
                         ObstructionReport, PreconditionError,
                         busemann_solution, characteristic_orbit,
                         classify_minimizer, heteroclinic_connect,
                         minimality_test, obstruction_check,
                         pseudograph_attainment, semi_infinite_orbit)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
