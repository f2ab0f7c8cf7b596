from .series import FLOAT, RATIONAL, DerivationForm, GradedSeries, jet_algebra
from .geometry import (flatness_residual, geodesic_exp, grothendieck, make_geometry)
from .fedosov import extract_linf, fedosov_solve, theta_series
from .graphs import FeynmanGraph, enumerate_bfv
from .weights import contract_graph, ihx_residual
from .aksz import (FiniteDgModel, FiniteModelField, bv_bracket, dcme_residuals,
                   split_action_eval)
