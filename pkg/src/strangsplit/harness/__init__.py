"""Benchmark problems, convergence sweeps, report files and the command line."""

from .convergence import (ConvergenceReport, Row, SweepConfig, emit_report, error_norm,
                          fit_slope, run_convergence)
from .problems import ProblemSpec, builtin_problems, get_problem, integro1d, quadratic1d, stiff2d
