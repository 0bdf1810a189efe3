"""Mesh-free differential operators on scattered 2D point clouds.

Classical providers (SPH, LABFM), a learned graph-network operator (NeMDO),
diagnostics that compare them, and a Taylor-Green vortex solver.
"""
__version__ = "0.1.0"
