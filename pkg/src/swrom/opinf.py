"""Operator inference for affine-parametric quadratic reduced models.

For training parameters ``mu_1..mu_M`` with reduced snapshots ``S_k`` and
derivatives ``dS_k`` the unknown ``X = [A_1, A_2, A_3, H_1, H_2, H_3]``
solves ``min sum_k || D(mu_k) X^T - dS_k^T ||_F`` with the data matrix::

    D(mu) = [alpha(mu) kron S^T, eta(mu) kron (S col-kron S)^T]

The problem decouples over the ``r`` right-hand-side columns; every solver
below factors the stacked data matrix once and reuses it for all columns.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as la

from . import ntswe
from .rom import ReducedAffineModel


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class RegularizerSpec:
    """``variant`` in {"none", "tikhonov", "tqr", "tsvd"} with its parameter.

    ``value`` is the penalty ``lambda`` for Tikhonov, the relative pivot
    tolerance for tQR, and the retained rank for tSVD.
    """

    variant: str = "none"
    value: float | None = None

    def __post_init__(self):
        v, x = self.variant, self.value
        if v == "none":
            return
        if v == "tikhonov":
            if x is None or not x > 0:
                raise ValueError("tikhonov needs lambda > 0")
        elif v == "tqr":
            if x is None or not 0 < x < 1:
                raise ValueError("tqr needs a tolerance in (0, 1)")
        elif v == "tsvd":
            if x is None or int(x) != x or x < 1:
                raise ValueError("tsvd needs an integer rank >= 1")
        else:
            raise ValueError(f"unknown regularizer {v!r}")

    @property
    def tag(self) -> str:
        return self.variant if self.value is None else f"{self.variant}-{self.value:g}"

    @classmethod
    def parse(cls, text: str) -> "RegularizerSpec":
        """Parse ``"none"``, ``"tikhonov:0.01"``, ``"tqr:1e-6"`` or ``"tsvd:25"``."""
        name, _, val = text.partition(":")
        if not val:
            return cls(name)
        x = float(val)
        return cls(name, int(x) if name == "tsvd" and x.is_integer() else x)


@dataclass
class SolveResult:
    X: np.ndarray
    residual_norm: float
    solution_norm: float
    effective_rank: int
    condition: float
    extra: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {"residual_norm": self.residual_norm, "solution_norm": self.solution_norm,
                "effective_rank": self.effective_rank, "condition": self.condition, **self.extra}


def column_kron(S: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker square: column ``k`` is ``S[:, k] kron S[:, k]``."""
    S = np.asarray(S, dtype=float)
    r, K = S.shape
    return (S[:, None, :] * S[None, :, :]).reshape(r * r, K)


def assemble_data_matrix(S_hat: np.ndarray, mu: float, coeffs=None) -> np.ndarray:
    """``K x (3r + 3r^2)`` data matrix of one training parameter.

    ``coeffs`` overrides ``(alpha(mu), eta(mu))``.
    """
    S_hat = np.asarray(S_hat, dtype=float)
    St = S_hat.T
    Qt = column_kron(S_hat).T
    a, e = coeffs if coeffs is not None else (ntswe.alpha(mu), ntswe.eta(mu))
    return np.hstack([a[0] * St, a[1] * St, a[2] * St, e[0] * Qt, e[1] * Qt, e[2] * Qt])


def stack_problem(sets):
    """Row-stack data matrices and transposed derivative data of all sets."""
    sets = list(sets)
    if not sets:
        raise ValueError("operator inference needs at least one training set")
    r = sets[0].r
    if any(s.r != r for s in sets):
        raise ValueError("training sets have inconsistent reduced dimensions")
    D = np.vstack([assemble_data_matrix(s.data, s.parameter) for s in sets])
    R = np.vstack([np.asarray(s.ddata, dtype=float).T for s in sets])
    return D, R


# Factorizations shared by single solves and L-curve sweeps.

class _SVDFactor:
    def __init__(self, D):
        self.U, self.s, self.Vt = la.svd(D, full_matrices=False, lapack_driver="gesdd")

    def tikhonov(self, B, lam):
        filt = self.s / (self.s ** 2 + lam)
        return self.Vt.T @ (filt[:, None] * (self.U.T @ B))

    def truncated(self, B, k):
        k = min(k, self.s.size)
        return self.Vt[:k].T @ ((self.U[:, :k].T @ B) / self.s[:k, None])


class _PivotedQR:
    def __init__(self, D):
        self.Q, self.R, self.piv = la.qr(D, mode="economic", pivoting=True)
        self.diag = np.abs(np.diag(self.R))

    def rank(self, tol):
        if self.diag.size == 0 or self.diag[0] == 0:
            return 0
        small = np.nonzero(self.diag < tol * self.diag[0])[0]
        return int(small[0]) if small.size else self.diag.size

    def solve(self, B, p):
        """Minimum-norm solution of the rank-``p`` truncated system."""
        n = self.R.shape[1]
        c = self.Q[:, :p].T @ B
        # R[:p] = T^T Z^T from the QR of its transpose, so z = Z T^{-T} c.
        Z, T = la.qr(self.R[:p].T, mode="economic")
        y = la.solve_triangular(T, c, trans="T", lower=False)
        z = Z @ y
        X = np.empty((n,) + np.shape(B)[1:])
        X[self.piv] = z
        return X


def _result(D, B, X, rank, cond, **extra):
    return SolveResult(X, float(np.linalg.norm(D @ X - B)), float(np.linalg.norm(X)),
                       int(rank), float(cond), extra)


def solve(D: np.ndarray, B: np.ndarray, reg: RegularizerSpec = RegularizerSpec()) -> SolveResult:
    """Solve ``min ||D X - B||_F`` column by column under ``reg``.

    - ``none``: minimum-norm least squares (pivoted QR, complete orthogonal
      decomposition).
    - ``tikhonov``: minimizes ``||D x - b||^2 + lambda ||x||^2`` through the
      SVD filter factors ``s / (s^2 + lambda)``.
    - ``tqr``: pivoted QR ``D P = Q R``; rank ``p`` is the first index with
      ``|R[p, p]| < tol |R[0, 0]|`` (``p = min(m, n)`` if none), then the
      minimum-norm solution of the truncated system.
    - ``tsvd``: keeps the ``k`` leading singular triplets.
    """
    D = np.asarray(D, dtype=float)
    B = np.asarray(B, dtype=float)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if D.shape[0] != B.shape[0]:
        raise ValueError(f"data matrix has {D.shape[0]} rows, right-hand side {B.shape[0]}")
    if D.shape[0] < 1 or D.shape[1] < 1:
        raise ValueError("empty least-squares problem")

    # Relative singular-value cutoff below which D is treated as rank deficient.
    cutoff = max(D.shape) * np.finfo(float).eps
    v = reg.variant
    if v == "none":
        X, _, rank, _ = la.lstsq(D, B, cond=cutoff, lapack_driver="gelsy")
        if rank == 0:
            raise RankDeficiencyError("data matrix has numerical rank 0")
        res = _result(D, B, X, rank, np.nan)
    elif v == "tikhonov":
        f = _SVDFactor(D)
        X = f.tikhonov(B, reg.value)
        res = _result(D, B, X, np.sum(f.s > 0), f.s[0] / f.s[-1] if f.s[-1] > 0 else np.inf)
    elif v == "tqr":
        f = _PivotedQR(D)
        p = f.rank(reg.value)
        if p == 0:
            raise RankDeficiencyError("data matrix has numerical rank 0")
        X = f.solve(B, p)
        res = _result(D, B, X, p, f.diag[0] / f.diag[p - 1])
    elif v == "tsvd":
        f = _SVDFactor(D)
        k = int(reg.value)
        if k > f.s.size or f.s[k - 1] <= cutoff * f.s[0]:
            raise ValueError(f"tsvd rank {k} exceeds the rank of the data matrix")
        X = f.truncated(B, k)
        res = _result(D, B, X, k, f.s[0] / f.s[k - 1])
    else:
        raise ValueError(f"unknown regularizer {v!r}")
    if squeeze:
        res.X = res.X[:, 0]
    return res


def infer(sets, reg: RegularizerSpec = RegularizerSpec(), label: str | None = None) -> ReducedAffineModel:
    """Learn the six reduced operators from projected training data."""
    sets = list(sets)
    D, B = stack_problem(sets)
    r = sets[0].r
    res = solve(D, B, reg)
    diag = res.diagnostics()
    diag.update(regularizer=reg.variant, reg_value=reg.value, rows=D.shape[0], cols=D.shape[1])
    return ReducedAffineModel.from_stacked(res.X.T, r, label=label or f"opinf-{reg.tag}",
                                           diagnostics=diag)


@dataclass
class LCurvePoint:
    reg_param: float
    residual_norm: float
    solution_norm: float
    effective_rank: int


def lcurve_corner(points) -> int:
    """Index of maximum discrete curvature in log10-log10 coordinates.

    ``points`` must be ordered from strongest to weakest regularization.
    Endpoints are never selected; ties go to the stronger regularization.
    """
    if len(points) < 3:
        raise ValueError("an L-curve needs at least 3 points")
    x = np.log10([max(p.residual_norm, 1e-300) for p in points])
    y = np.log10([max(p.solution_norm, 1e-300) for p in points])
    if np.ptp(x) == 0 and np.ptp(y) == 0:
        raise ValueError("degenerate L-curve: all points coincide")
    dx, dy = np.gradient(x), np.gradient(y)
    ddx, ddy = np.gradient(dx), np.gradient(dy)
    speed = (dx ** 2 + dy ** 2) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(speed > 0, (dy * ddx - dx * ddy) / speed, -np.inf)
    kappa[0] = kappa[-1] = -np.inf
    return int(np.argmax(kappa))


def lcurve_sweep(sets, variant: str, params):
    """Solve once per parameter and locate the L-curve corner.

    Parameters are sorted from strongest to weakest regularization (large to
    small for both Tikhonov and tQR). Returns ``(points, corner_index)``.
    """
    params = sorted((float(p) for p in params), reverse=True)
    if len(params) < 3:
        raise ValueError("an L-curve sweep needs at least 3 parameters")
    D, B = stack_problem(sets)
    points = []
    if variant == "tikhonov":
        f = _SVDFactor(D)
        for lam in params:
            RegularizerSpec("tikhonov", lam)  # validates
            X = f.tikhonov(B, lam)
            points.append(LCurvePoint(lam, float(np.linalg.norm(D @ X - B)),
                                      float(np.linalg.norm(X)), int(np.sum(f.s > 0))))
    elif variant == "tqr":
        f = _PivotedQR(D)
        for tol in params:
            RegularizerSpec("tqr", tol)  # validates
            p = f.rank(tol)
            X = f.solve(B, p)
            points.append(LCurvePoint(tol, float(np.linalg.norm(D @ X - B)),
                                      float(np.linalg.norm(X)), p))
    else:
        raise ValueError(f"L-curve sweeps support tikhonov and tqr, not {variant!r}")
    return points, lcurve_corner(points)
