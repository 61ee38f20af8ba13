"""Intrusive and non-intrusive reduced-order models for the parametrized
non-traditional shallow water equations."""

from .grid import Grid2D
from .integrate import IntegrationError, IntegratorConfig, Trajectory, integrate
from .ntswe import PhysicalParams
from .opinf import RegularizerSpec, infer, lcurve_sweep, solve
from .pod import PodBasis, compute_pod, intrusive_reduce
from .rom import ReducedAffineModel, lift, rom_rhs, simulate
from .snapshots import ReducedSnapshotSet, SnapshotSet

__all__ = [
    "Grid2D", "IntegrationError", "IntegratorConfig", "Trajectory", "integrate",
    "PhysicalParams", "RegularizerSpec", "infer", "lcurve_sweep", "solve",
    "PodBasis", "compute_pod", "intrusive_reduce", "ReducedAffineModel", "lift",
    "rom_rhs", "simulate", "ReducedSnapshotSet", "SnapshotSet",
]

__version__ = "0.1.0"
