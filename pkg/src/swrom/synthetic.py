"""Random affine quadratic systems with known operators, for recovery checks."""

import numpy as np

from .integrate import IntegratorConfig, integrate
from .rom import ReducedAffineModel
from .snapshots import ReducedSnapshotSet


def symmetrize_quadratic(H: np.ndarray) -> np.ndarray:
    """Average ``H[:, a*r+b]`` and ``H[:, b*r+a]``; ``H (w kron w)`` is unchanged."""
    r = H.shape[0]
    T = H.reshape(r, r, r)
    return (0.5 * (T + T.transpose(0, 2, 1))).reshape(r, r * r)


def random_stable_model(r: int, rng: np.random.Generator, damping: float = 1.0,
                        quad_scale: float = 0.1) -> ReducedAffineModel:
    """Dissipative linear part plus weak symmetric quadratic terms.

    Quadratic operators are stored in the symmetric (minimum-norm)
    representative, the only one least squares can identify.
    """
    def skew(s):
        M = s * rng.standard_normal((r, r))
        return M - M.T

    A1 = -damping * np.eye(r) + 0.2 * rng.standard_normal((r, r))
    A1 -= max(0.0, np.max(np.linalg.eigvals(A1).real) + damping / 2) * np.eye(r)
    A2 = skew(0.5)
    A3 = 0.1 * rng.standard_normal((r, r))
    H = [symmetrize_quadratic(quad_scale * rng.standard_normal((r, r * r))) for _ in range(3)]
    return ReducedAffineModel([A1, A2, A3], H, label="generator")


def training_sets(model: ReducedAffineModel, thetas, n_traj: int = 10, n_samples: int = 20,
                  dt: float = 0.25, rng: np.random.Generator | None = None, scale: float = 0.5):
    """Trajectories from random initial states with exact derivatives.

    Each returned set concatenates ``n_traj`` trajectories of ``n_samples``
    samples, so ``K = n_traj * n_samples`` columns per parameter.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    cfg = IntegratorConfig(t_end=dt * (n_samples - 1), sample_dt=dt, rtol=1e-10, atol=1e-12)
    sets = []
    for mu in thetas:
        f = model.rhs_function(mu)
        blocks = [integrate(f, scale * rng.standard_normal(model.r), cfg).states for _ in range(n_traj)]
        S = np.hstack(blocks)
        dS = np.column_stack([f(S[:, k]) for k in range(S.shape[1])])
        times = np.tile(cfg.sample_times(), n_traj)
        sets.append(ReducedSnapshotSet(float(mu), times, S, dS))
    return sets


def operator_errors(model: ReducedAffineModel, reference: ReducedAffineModel) -> dict:
    """Relative Frobenius error of every operator against ``reference``."""
    out = {}
    for name, got, want in zip(["A1", "A2", "A3", "H1", "H2", "H3"],
                               model.A_hats + model.H_hats, reference.A_hats + reference.H_hats):
        out[name] = float(np.linalg.norm(got - want) / np.linalg.norm(want))
    return out
