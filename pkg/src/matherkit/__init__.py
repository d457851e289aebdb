"""Numerical Mather-Mane theory for mechanical Lagrangians on the circle."""

from .critical import (ConvergenceWarning, CriticalValueReport, OccupationMeasure,
                       alpha_lax_oleinik, alpha_lp, beta_fenchel, subdifferential_alpha)
from .grids import ActionKernel, PhaseGrid, admissible_edges, build_kernel
from .kernels import BACKEND
from .model import (CohomologyClass, LagrangianSpec, free, integrate_orbit, load_spec,
                    pendulum, spec_from_json)
from .potential import (NegativeCycleError, PotentialTable, d_c, h_c_table, mane_potential,
                        peierls_barrier)
from .sets import (PointCloud, aubry_set, graph_check, hausdorff, lift_aubry, mane_set,
                   mather_support, projected_aubry)

__version__ = "0.1.0"

__all__ = [
    "ActionKernel", "BACKEND", "CohomologyClass", "ConvergenceWarning", "CriticalValueReport",
    "LagrangianSpec", "NegativeCycleError", "OccupationMeasure", "PhaseGrid", "PointCloud",
    "PotentialTable", "admissible_edges", "alpha_lax_oleinik", "alpha_lp", "aubry_set",
    "beta_fenchel", "build_kernel", "d_c", "free", "graph_check", "h_c_table", "hausdorff",
    "integrate_orbit", "lift_aubry", "load_spec", "mane_potential", "mane_set", "mather_support",
    "pendulum", "peierls_barrier", "projected_aubry", "spec_from_json", "subdifferential_alpha",
]
