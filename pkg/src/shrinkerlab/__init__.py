"""Numerical self-shrinkers of mean curvature flow in arbitrary codimension:
construction, Gaussian-weighted functional and its variations, and
F-instability certificates."""

from .catalog import (NAMED_SPECS, Shrinker, build, minimal_legendrian,
                      product_shrinker, resolve_spec)
from .charts import AffineChart, AxisSpec, Chart, ProductChart, TrigChart
from .functional import (FEvaluation, VariationData, apply_L_perp, evaluate_F,
                         first_variation, second_variation_at_critical,
                         second_variation_general, weighted_inner)
from .geometry import (GridGeometry, NormalField, PointGeometry,
                       compute_geometry, normal_covariant_derivative,
                       point_geometry, scalar_script_L, shrinker_residual)
from .profile_curves import (ProfileCurve, TangentFieldOnM, assemble,
                             circle_profile, e_max, integrate, ode_rhs,
                             select_w0, shoot_closed, variation_field)
from .quadrature import QuadratureGrid, build_grid
from .stability import (ConstraintResiduals, Decomposition, StabilityReport,
                        certify_anciaux_instability,
                        certify_product_instability, constraint_residuals,
                        decompose, quadratic_form_Q,
                        stability_verdict_on_trial_space)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
