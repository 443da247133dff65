"""Finite element forward solver for the complete electrode and shunt models of EIT."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, EitError, GeometryError,  # noqa: E402
                     NumericalError, StructuralError, UnsupportedModelError)
from .mesh import (Mesh, build_regular_polygon_mesh, prolongation, read_mesh,  # noqa: E402
                   refine_boundary_layer, refine_levels, refine_uniform, write_mesh)
from .assembly import (ConductivityField, DofMap, ElectrodeLayout, assemble_cem,  # noqa: E402
                       assemble_load, assemble_shunt, element_stiffness,
                       electrode_edge_blocks, trig_current)
from .solver import (FESolution, condition_estimate, electrode_currents,  # noqa: E402
                     measurement_matrix, solve, solve_cem, solve_shunt)
from .analysis import (NormMatrices, diff_nested, diff_same_mesh, fit_loglog,  # noqa: E402
                       norms, spectral_norm)
from .experiments import (SweepConfig, SweepReport, graded_mesh, sweep_h,  # noqa: E402
                          sweep_z, uniform_hierarchy)
from .report import csv_text, emit_report, read_csv, svg_text  # noqa: E402
