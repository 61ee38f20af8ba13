"""Reduced affine quadratic models and their simulation.

A model holds ``A_hat_1..3`` (r x r) and ``H_hat_1..3`` (r x r^2) and
evaluates::

    dw/dt = sum_i alpha_i(mu) A_hat_i w + sum_j eta_j(mu) H_hat_j (w kron w)

Intrusive and inferred models share this class.
"""

import numpy as np

from . import ntswe
from .integrate import IntegratorConfig, Trajectory, integrate
from .snapshots import KIND_MODEL, read_container, write_container


class ReducedAffineModel:
    def __init__(self, A_hats, H_hats, label="", basis_ref="", diagnostics=None):
        A_hats = [np.asarray(A, dtype=float) for A in A_hats]
        H_hats = [np.asarray(H, dtype=float) for H in H_hats]
        if len(A_hats) != 3 or len(H_hats) != 3:
            raise ValueError("expected three linear and three quadratic operators")
        r = A_hats[0].shape[0]
        for A in A_hats:
            if A.shape != (r, r):
                raise ValueError(f"linear operator has shape {A.shape}, expected {(r, r)}")
        for H in H_hats:
            if H.shape != (r, r * r):
                raise ValueError(f"quadratic operator has shape {H.shape}, expected {(r, r * r)}")
        if not all(np.all(np.isfinite(M)) for M in A_hats + H_hats):
            raise ValueError("reduced operators contain non-finite entries")
        self.A_hats = A_hats
        self.H_hats = H_hats
        self.label = label
        self.basis_ref = basis_ref
        self.diagnostics = diagnostics or {}

    @property
    def r(self) -> int:
        return self.A_hats[0].shape[0]

    def operators(self, mu):
        """Return ``(A(mu), H(mu))`` combined with the affine coefficients."""
        a, e = ntswe.alpha(mu), ntswe.eta(mu)
        A = sum(ai * Ai for ai, Ai in zip(a, self.A_hats))
        H = sum(ej * Hj for ej, Hj in zip(e, self.H_hats))
        return A, H

    def rhs(self, w_hat, mu):
        A, H = self.operators(mu)
        w_hat = np.asarray(w_hat, dtype=float)
        return A @ w_hat + H @ np.kron(w_hat, w_hat)

    def rhs_function(self, mu):
        """Closure over the operators at ``mu``; for repeated evaluation."""
        A, H = self.operators(mu)

        def f(w_hat):
            return A @ w_hat + H @ np.kron(w_hat, w_hat)

        return f

    def truncate(self, r: int) -> "ReducedAffineModel":
        """Operators of the leading ``r`` coordinates (valid for nested bases)."""
        R = self.r
        if r > R:
            raise ValueError(f"cannot truncate a dimension-{R} model to {r}")
        idx = (np.arange(r)[:, None] * R + np.arange(r)[None, :]).ravel()
        return ReducedAffineModel([A[:r, :r] for A in self.A_hats],
                                  [H[:r, idx] for H in self.H_hats],
                                  self.label, self.basis_ref, dict(self.diagnostics))

    def stacked(self) -> np.ndarray:
        """``[A_hat_1, A_hat_2, A_hat_3, H_hat_1, H_hat_2, H_hat_3]`` (r x (3r + 3r^2))."""
        return np.hstack(self.A_hats + self.H_hats)

    @classmethod
    def from_stacked(cls, X, r, **kw) -> "ReducedAffineModel":
        X = np.asarray(X, dtype=float)
        if X.shape != (r, 3 * r + 3 * r * r):
            raise ValueError(f"stacked operator has shape {X.shape}")
        A = [X[:, i * r:(i + 1) * r] for i in range(3)]
        off = 3 * r
        H = [X[:, off + j * r * r: off + (j + 1) * r * r] for j in range(3)]
        return cls(A, H, **kw)

    def save(self, path) -> None:
        meta = {"label": self.label, "basis_ref": self.basis_ref, "r": self.r,
                "diagnostics": self.diagnostics}
        write_container(path, KIND_MODEL, self.stacked(), meta=meta)

    @classmethod
    def load(cls, path) -> "ReducedAffineModel":
        c = read_container(path, KIND_MODEL)
        m = c["meta"]
        return cls.from_stacked(c["data"], int(m["r"]), label=m.get("label", ""),
                                basis_ref=m.get("basis_ref", ""), diagnostics=m.get("diagnostics"))


def rom_rhs(model: ReducedAffineModel, w_hat, mu):
    return model.rhs(w_hat, mu)


def simulate(model: ReducedAffineModel, w0_hat, mu, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the reduced model from ``w0_hat`` at parameter ``mu``.

    Raises :class:`~swrom.integrate.IntegrationError` on blow-up; for
    inferred models this is an outcome to report.
    """
    w0_hat = np.asarray(w0_hat, dtype=float)
    if w0_hat.shape != (model.r,):
        raise ValueError(f"initial reduced state has shape {w0_hat.shape}, expected ({model.r},)")
    return integrate(model.rhs_function(mu), w0_hat, cfg)


def lift(V, reduced_states):
    V = np.asarray(V)
    reduced_states = np.asarray(reduced_states)
    if V.shape[1] != reduced_states.shape[0]:
        raise ValueError(f"basis has {V.shape[1]} columns, reduced states have {reduced_states.shape[0]} rows")
    return V @ reduced_states
