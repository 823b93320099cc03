"""Spectral theory of Dirac systems on star graphs.

Submodules
----------
graph        data model and configuration I/O
propagator   fundamental matrices and Pruefer angles
weyl         Weyl functions of the edges
matching     vertex conditions and Krein-type matrices
spectrum     edge and Robin spectra, interlacing, eigenfunctions
resolvent    Green's functions, resolvents, trace formulas
dislocation  dislocation indices and counting bounds
oracle       dense discretization used as an independent check
cli          command-line front end
"""

__version__ = "0.1.0"

from .graph import (ConfigError, EdgeSpec, General, GridFunction, MatchingCondition, Robin, SolverSettings,
                    StarGraph, emit_config, load_config, random_graph, sample_potential)
from .propagator import (PropagationError, free_propagator, propagate, propagate_path, propagate_with_derivative,
                         prufer_count)
from .weyl import PoleError, WeylSample, char_entries, m_tau, nevanlinna_kernel, weyl_matrix
from .matching import BoundaryPair, MatchingError, as_pair, complement_pair, robin_matrices, validate_matching
from .spectrum import (Spectrum, SpectrumEntry, check_interlacing, d_R, edge_eigenvalues, eigenfunction,
                       monotonicity_check, robin_spectrum)
from .resolvent import (SpectralPointError, apply_edge_resolvent, apply_graph_resolvent, green_edge,
                        regularized_trace, trace_edge_diff, trace_robin_diff)
from .dislocation import DislocationReport, dislocation_report, kappa_counting, kappa_integral
from .oracle import DiscreteOperator, ResolutionError, discretize, oracle_spectrum

__all__ = [
    "__version__",
    "ConfigError", "EdgeSpec", "General", "GridFunction", "MatchingCondition", "Robin", "SolverSettings",
    "StarGraph", "emit_config", "load_config", "random_graph", "sample_potential",
    "PropagationError", "free_propagator", "propagate", "propagate_path", "propagate_with_derivative",
    "prufer_count",
    "PoleError", "WeylSample", "char_entries", "m_tau", "nevanlinna_kernel", "weyl_matrix",
    "BoundaryPair", "MatchingError", "as_pair", "complement_pair", "robin_matrices", "validate_matching",
    "Spectrum", "SpectrumEntry", "check_interlacing", "d_R", "edge_eigenvalues", "eigenfunction",
    "monotonicity_check", "robin_spectrum",
    "SpectralPointError", "apply_edge_resolvent", "apply_graph_resolvent", "green_edge", "regularized_trace",
    "trace_edge_diff", "trace_robin_diff",
    "DislocationReport", "dislocation_report", "kappa_counting", "kappa_integral",
    "DiscreteOperator", "ResolutionError", "discretize", "oracle_spectrum",
]
