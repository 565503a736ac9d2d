"""Robust cut-cell generation: intersect a Cartesian grid with a closed STL surface."""
from .graph_core import CAP, OPEN, CorruptRotationSystem, RotationSystem, faces, pol
from .halfspace import DistanceMatrix, Plane, Tolerances, signed_distances
from .clip import clip_by_halfspace
from .convexify import colouring, convex_decompose, walls
from .measures import MetricsReport, area, error_metrics, simplexify, volume
from .mesh_io import (CartesianGrid, MeshError, StlParseError, SurfaceMesh, background_grid,
                      export_vtk, perturb, read_stl, weld)
from .global_cut import CellState, CutMesh, classify_cells, cut_cell, cut_mesh

__version__ = "0.1.0"
