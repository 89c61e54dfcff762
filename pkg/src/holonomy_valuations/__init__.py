"""Numerical lab for G2- and Spin(7)-invariant valuations on polytopes."""
from . import forms, grassmann, groups, kinematics, polytope, valuations
from .groups import CertificationError, HaarSampler
from .kinematics import KinematicExperiment, KinematicReport, pkf_lhs, run_experiment
from .polytope import Polytope, intersects, intrinsic_volumes
from .valuations import ValuationId, ValuationValue, evaluate, hadwiger_rank_check

__version__ = "0.1.0"

__all__ = [
    "forms", "grassmann", "groups", "kinematics", "polytope", "valuations",
    "CertificationError", "HaarSampler", "KinematicExperiment", "KinematicReport",
    "pkf_lhs", "run_experiment", "Polytope", "intersects", "intrinsic_volumes",
    "ValuationId", "ValuationValue", "evaluate", "hadwiger_rank_check",
]
