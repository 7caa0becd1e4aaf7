"""Scattering from periodic Dirichlet surfaces via the Floquet-Bloch transform,
with exact DtN and PML truncation of the cell problems."""
from .errors import *  # noqa: F401,F403
from .numerics import (Arc, Contour, PmlProfile, Segment, Wavenumber, beta, build_contour,
                       coth_factor, coth_minus_one, contour_quadrature, cutoff_values,
                       decompose_wavenumber, default_delta, h_func, split_nodes,
                       sqrt_branch, straight_contour)
from .geometry import (CellMesh, PeriodicSurface, build_cell_mesh, flat_surface,
                       make_surface, grating_surface, read_mesh, trace_fourier_coeffs,
                       write_mesh)
from .assembly import (DofMap, OperatorBlocks, SourceTerm, assemble_blocks, assemble_D,
                       assemble_pml_layer, assemble_rhs, zero_source)
from .cellsolve import CellProblem, CellSolution, evaluate_field, solve_cell
from .bloch import FieldOnSet, line_points, reconstruct, relative_error
from .oracle import ModalProblem, bump, flat_cell_oracle, flat_modal_solution
from .experiments import (ExperimentConfig, SweepResult, fit_slope, make_bump_source,
                          run_pml_sweep, smoothstep, verify_h_bound)
from .cli import cli_main

__version__ = "0.1.0"
