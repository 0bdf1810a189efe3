"""Single import point for the classical providers.

The implementations live in :mod:`meshfree.kernels`, :mod:`meshfree.sph`,
:mod:`meshfree.labfm` and :mod:`meshfree.operators`.
"""
from .kernels import Kernel, hermite, kernel_eval, wendland_shape
from .labfm import LabfmConfig, abf_vector, labfm_weights
from .operators import DifferenceOperator, OperatorWeights, apply_operator, global_matrix, write_weight_dump
from .sph import SphConfig, sph_gradient_weights, sph_laplacian_weights, sph_weights

__all__ = [
    "Kernel", "hermite", "kernel_eval", "wendland_shape",
    "LabfmConfig", "abf_vector", "labfm_weights",
    "DifferenceOperator", "OperatorWeights", "apply_operator", "global_matrix", "write_weight_dump",
    "SphConfig", "sph_gradient_weights", "sph_laplacian_weights", "sph_weights",
]
