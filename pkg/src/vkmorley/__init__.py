"""Morley finite elements for the clamped von Karman plate equations."""
from .mesh import Mesh, l_shape_crisscross, level_mesh, mesh_stats, red_refine, unit_square_crisscross
from .morley import DofMap, MorleySpace, build_dof_map, element_basis, evaluate, interpolate
from .forms import StateVector, VonKarmanOperator, problem_operator
from .solver import NewtonOptions, newton_solve, solve_linear
from .problems import example1, example2, example3
from .analysis import ConvergenceReport, broken_error, rates

__version__ = "0.1.0"
