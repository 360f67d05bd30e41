"""Online estimation of all Sobol' indices by Pick-Freeze mirror descent."""

from .baseline import pf1_all, pf1_estimate
from .mirror import (
    EstimatorState,
    SamplingStrategy,
    StepSchedule,
    advance,
    cesaro_average,
    gradient_estimate,
    hessian_reference,
    replicate_rng,
    resolve_weights,
    run,
    weight_exp_norm,
)
from .models import InputLaw, ModelSpec, external_model, hybridize, make_model, pick_freeze_draw
from .oracle import ReferenceTable, closed_indices_reference, reference, sobol_from_closed, total_order_indices
from .simplex import bregman_divergence, entropy, mirror_step, uniform_init
from .subsets import (
    SubsetUniverse,
    cardinality,
    closed_coordinate,
    dense_mobius_matrix,
    mobius_transform,
    subsets_of,
    vp_spectrum,
    zeta_transform,
)

__version__ = "0.1.0"
