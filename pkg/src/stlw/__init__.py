"""Space-time finite-volume laboratory for scalar conservation laws.

Grids of polygonal space-time cells, numerical flux and source
definitions, marching schemes and empirical checks of the conditions
under which convergent conservative schemes converge to weak entropy
solutions.
"""

from .grid import (SpaceTimeGrid, build_local_timestep_grid, build_moving_vertex_grid,
                   build_perturbed_grid, build_staggered_grid, build_uniform_grid,
                   grid_metrics, insert_remap_layer)
from .initial import InitialData
from .models import burgers, advection, trivial, selfsimilar, kruzkov_pair
from .numerics import (GridFunction, build_scheme, lf_scheme, spacetime_lf_scheme,
                       staggered_lf_scheme)
from .solver import march, march_staggered_streaming, solution_profile

__version__ = "0.1.0"

__all__ = [
    "SpaceTimeGrid", "build_uniform_grid", "build_staggered_grid", "build_local_timestep_grid",
    "build_moving_vertex_grid", "build_perturbed_grid", "insert_remap_layer", "grid_metrics",
    "InitialData", "burgers", "advection", "trivial", "selfsimilar", "kruzkov_pair",
    "GridFunction", "build_scheme", "lf_scheme", "staggered_lf_scheme", "spacetime_lf_scheme",
    "march", "march_staggered_streaming", "solution_profile",
]
