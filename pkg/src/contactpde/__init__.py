"""Contact geometry on jet spaces: symbolic kernel, differential forms,
characteristics of first-order PDEs and Monge-Ampere equations."""

from .symbolic import parse, simplify, is_zero, ZeroKind
from .jets import Chart, ODEChart, VectorField, KForm, contact_form, total_derivative, legendre
from .distributions import Distribution, derived_flag, type_of_field, symplectic_orthogonal
from .hamiltonian import hamiltonian_field, in_involution
from .first_order import (
    FirstOrderPDE,
    CauchyDatum,
    complete_datum,
    integrate_characteristics,
    ode_characteristic_field,
    singular_locus,
)
from .grassmannian import pluecker, on_lie_quadric, line_prolongation, is_strong_characteristic
from .mae2d import MAE2D, discriminant, classify, characteristic_distributions, goursat_form, mae_from_distribution
from .maend import GoursatMAE, MongeProblem, monge_extend, complex_mae, restrict_form_to_plane

__version__ = "0.1.0"
