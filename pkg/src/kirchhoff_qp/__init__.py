"""Quasi-periodic solutions of the forced Kirchhoff equation on ``T^d``.

Galerkin/Nash-Moser solver, reduction of the linearized operator to
constant coefficients, decay-norm calculus and multiscale diagnostics.
"""
__version__ = "0.1.0"

from .decay import DecayMatrix, box_indices  # noqa: E402
from .diophantine import FrequencyData, check_dio, check_dioquad, in_I_bar, in_I_tilde  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .fourier import PhiGrid, TorusFunction, project, s0_of, sobolev_norm  # noqa: E402
from .kirchhoff import ProblemData, apply_linearized, forcing_preset, residual  # noqa: E402
from .nash_moser import ExponentSet, check_exponents, solve  # noqa: E402
from .reduction import reduce  # noqa: E402

__all__ = ["__version__", "DecayMatrix", "box_indices", "FrequencyData", "check_dio",
           "check_dioquad", "in_I_bar", "in_I_tilde", "PhiGrid", "TorusFunction",
           "project", "s0_of", "sobolev_norm", "ProblemData", "apply_linearized",
           "forcing_preset", "residual", "ExponentSet", "check_exponents", "solve",
           "reduce"]
