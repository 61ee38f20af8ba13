"""POD bases and intrusive Galerkin reduction of the affine NTSWE pieces."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as la

from . import ntswe
from .grid import Grid2D
from .rom import ReducedAffineModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PodBasis:
    """Leading ``r`` left singular vectors ``V`` and all singular values."""

    V: np.ndarray
    sigma: np.ndarray

    @property
    def r(self) -> int:
        return self.V.shape[1]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def truncate(self, r: int) -> "PodBasis":
        if r > self.r:
            raise ValueError(f"cannot truncate a rank-{self.r} basis to {r}")
        return PodBasis(self.V[:, :r], self.sigma)

    def projection_error(self, r: int | None = None) -> float:
        """Eckart-Young relative projection error of the training matrix."""
        r = self.r if r is None else r
        s2 = self.sigma.astype(float) ** 2
        return float(np.sqrt(s2[r:].sum() / s2.sum()))


def compute_pod(S: np.ndarray, r: int) -> PodBasis:
    """Thin SVD of the snapshot matrix truncated to ``r`` columns."""
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise ValueError("snapshot matrix contains non-finite values")
    if r < 1 or r > min(S.shape):
        raise ValueError(f"r={r} outside 1..{min(S.shape)}")
    U, sigma, _ = la.svd(S, full_matrices=False, lapack_driver="gesdd")
    if sigma[r - 1] < 1e-14 * sigma[0]:
        log.warning("r=%d exceeds the numerical rank of the snapshot matrix", r)
    return PodBasis(np.ascontiguousarray(U[:, :r]), sigma)


def numerical_rank(sigma, rtol=1e-14) -> int:
    sigma = np.asarray(sigma)
    return int(np.sum(sigma > rtol * sigma[0])) if sigma.size and sigma[0] > 0 else 0


def intrusive_reduce(basis: PodBasis, grid: Grid2D, delta: float = ntswe.DELTA,
                     chunk: int = 16) -> ReducedAffineModel:
    """Galerkin-project the six affine pieces onto ``basis``.

    ``A_hat_i = V^T A_i V`` uses one evaluation per basis vector.
    ``H_hat_j[:, a*r + b] = V^T B_j(v_a, v_b)`` is filled from the
    ``r(r+1)/2`` pairs ``a <= b`` and mirrored.
    """
    V = basis.V
    if V.shape[0] != 3 * grid.size:
        raise ValueError(f"basis has {V.shape[0]} rows, grid needs {3 * grid.size}")
    r = V.shape[1]
    Vt = V.T
    A_hats = [Vt @ ntswe.linear_term(grid, Vt, i, delta).T for i in ntswe.LINEAR_TERMS]
    H_hats = []
    for j in ntswe.QUADRATIC_TERMS:
        H = np.empty((r, r, r))
        for a in range(r):
            for b0 in range(a, r, chunk):
                b1 = min(b0 + chunk, r)
                vals = ntswe.bilinear_term(grid, Vt[a], Vt[b0:b1], j, delta)
                proj = vals @ V  # (b1 - b0, r)
                H[:, a, b0:b1] = proj.T
                H[:, b0:b1, a] = proj.T
        H_hats.append(H.reshape(r, r * r))
    return ReducedAffineModel(A_hats, H_hats, label="intrusive")
