"""Double Hopf bifurcation analysis for reaction-diffusion systems with
discrete delays: Hopf curves, normal forms, unfoldings and simulation."""

from .errors import HypothesisFailure, NumericalDegeneracy, SimulationError
from .model import (ModelSpec, ModelError, builtin_epidemic, builtin_predprey, expand_at,
                    prepare_critical, validate_model, BUILTINS)
from .spectrum import (CharSlice, char_residual, imaginary_roots, transversality, hopf_curve,
                       hopf_branches, find_double_hopf, verify_nondegeneracy, DoubleHopfPoint)
from .eigenbasis import EigenData, build_basis, basis_for_point
from .normalform import NormalForm, assemble, spatial_integrals
from .unfolding import AmplitudeSystem, reduce, classify, region_of, amplitude_flow
from .modelio import load_model, model_from_dict

__version__ = "0.1.0"


def analyse(spec: ModelSpec, point: DoubleHopfPoint, cond_limit: float = 1e12):
    """Normal form and unfolding class at a located double Hopf point."""
    rescaled = prepare_critical(spec, point.param)
    basis = basis_for_point(rescaled, point)
    nf = assemble(rescaled, basis, expand_at(rescaled), cond_limit=cond_limit)
    amp = reduce(nf)
    return nf, amp, classify(amp)
