"""Hamiltonian and Lagrangian dynamics on uniform q-contact manifolds."""

from .calculus import ExtendedPoint
from .dynamics import IntegratorConfig, Trajectory, integrate, integrate_pontryagin
from .expressions import parse_expression
from .geometry import QContactStructure, hamiltonian_vector_field, verify_structure
from .lagrangian import LagrangianSystem
from .models import ModelConfig, builtin

__all__ = [
    "ExtendedPoint", "IntegratorConfig", "Trajectory", "integrate", "integrate_pontryagin",
    "parse_expression", "QContactStructure", "hamiltonian_vector_field", "verify_structure",
    "LagrangianSystem", "ModelConfig", "builtin",
]

__version__ = "0.1.0"
