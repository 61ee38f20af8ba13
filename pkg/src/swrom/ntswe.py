"""Non-traditional shallow water equations in canonical-velocity form.

The state is ``w = [ut; vt; h]`` (canonical velocities and layer height),
each block a field on a :class:`~swrom.grid.Grid2D`. Orientation angle and
bottom topography are fixed to zero, so the rotation vector is
``(0, cos(theta), sin(theta))``.

The semi-discrete right-hand side is exactly quadratic in ``w`` and splits
into three linear and three quadratic pieces with coefficient functions of
the latitude ``theta``::

    rhs(w) = sum_i alpha_i(theta) * A_i(w) + sum_j eta_j(theta) * Q_j(w)
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .grid import Grid2D

DELTA = 0.145
DENSE_ORACLE_CAP = 400

LINEAR_TERMS = (1, 2, 3)
QUADRATIC_TERMS = (1, 2, 3)


@dataclass(frozen=True)
class PhysicalParams:
    theta: float
    delta: float = DELTA
    phi: float = 0.0
    hb: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not 0.0 < self.theta < np.pi / 2:
            raise ValueError(f"theta must lie in (0, pi/2), got {self.theta}")
        if self.phi != 0.0 or self.hb != 0.0:
            raise NotImplementedError("only phi = 0 and hb = 0 are supported")

    @property
    def omega(self) -> tuple[float, float, float]:
        c = np.cos(self.theta)
        return (c * np.sin(self.phi), c * np.cos(self.phi), np.sin(self.theta))


def alpha(mu: float) -> np.ndarray:
    """Coefficients of the linear pieces: ``(1, sin mu, sin mu cos mu)``."""
    s, c = np.sin(mu), np.cos(mu)
    return np.array([1.0, s, s * c])


def eta(mu: float) -> np.ndarray:
    """Coefficients of the quadratic pieces: ``(1, cos mu, cos^2 mu)``."""
    c = np.cos(mu)
    return np.array([1.0, c, c * c])


def split(grid: Grid2D, w):
    """Return the ``(ut, vt, h)`` fields of state(s) ``w`` of shape (..., N)."""
    w = np.asarray(w, dtype=float)
    n = grid.size
    if w.shape[-1] != 3 * n:
        raise ValueError(f"state length {w.shape[-1]} does not match 3*{n}")
    f = w.reshape(w.shape[:-1] + (3,) + grid.shape)
    return f[..., 0, :, :], f[..., 1, :, :], f[..., 2, :, :]


def stack(ut, vt, h) -> np.ndarray:
    out = np.stack([ut, vt, h], axis=-3)
    return out.reshape(out.shape[:-3] + (-1,))


def rhs(grid: Grid2D, w, p: PhysicalParams) -> np.ndarray:
    """Time derivative of the state, built from the momentum/continuity form.

    ``ut_t = qh*v - Phi_x``, ``vt_t = -qh*u - Phi_y``,
    ``h_t = -(h u)_x - (h v)_y`` with ``qh = Omega^z + vt_x - ut_y``,
    particle velocities ``u = ut - delta Omega^y h/2``, ``v = vt`` and the
    Bernoulli potential ``Phi = (u^2 + v^2)/2 + h - delta Omega^y h u / 2``.
    Accepts a batch of states along leading axes.
    """
    _, oy, oz = p.omega
    d = p.delta
    ut, vt, h = split(grid, w)
    u = ut - 0.5 * d * oy * h
    v = vt
    qh = oz + grid.ddx(vt) - grid.ddy(ut)
    phi = 0.5 * (u * u + v * v) + h - 0.5 * d * oy * h * u
    dut = qh * v - grid.ddx(phi)
    dvt = -qh * u - grid.ddy(phi)
    dh = -grid.ddx(h * u) - grid.ddy(h * v)
    return stack(dut, dvt, dh)


def linear_term(grid: Grid2D, w, i: int, delta: float = DELTA) -> np.ndarray:
    """Coefficient-free linear piece ``A_i(w)``.

    1: pressure gradient ``(-h_x, -h_y, 0)``; 2: Coriolis rotation
    ``(vt, -ut, 0)``; 3: ``(0, delta h / 2, 0)``.
    """
    ut, vt, h = split(grid, w)
    zero = np.zeros_like(h)
    if i == 1:
        return stack(-grid.ddx(h), -grid.ddy(h), zero)
    if i == 2:
        return stack(vt, -ut, zero)
    if i == 3:
        return stack(zero, 0.5 * delta * h, zero)
    raise ValueError(f"unknown linear term index {i}")


def bilinear_term(grid: Grid2D, x, y, j: int, delta: float = DELTA) -> np.ndarray:
    """Symmetric bilinear form ``B_j(x, y)`` with ``B_j(w, w) = Q_j(w)``."""
    return 0.5 * (_bilinear_raw(grid, x, y, j, delta) + _bilinear_raw(grid, y, x, j, delta))


def quadratic_term(grid: Grid2D, w, j: int, delta: float = DELTA) -> np.ndarray:
    """Coefficient-free quadratic piece ``Q_j(w)``."""
    return _bilinear_raw(grid, w, w, j, delta)


def _bilinear_raw(grid, x, y, j, delta):
    # Non-symmetric form q(x, y) with q(w, w) = Q_j(w); derivatives act on x.
    xu, xv, xh = split(grid, x)
    yu, yv, yh = split(grid, y)
    if j == 1:
        zeta = grid.ddx(xv) - grid.ddy(xu)
        ke = 0.5 * (xu * yu + xv * yv)
        return stack(zeta * yv - grid.ddx(ke),
                     -zeta * yu - grid.ddy(ke),
                     -grid.ddx(xh * yu) - grid.ddy(xh * yv))
    if j == 2:
        zeta = grid.ddx(xv) - grid.ddy(xu)
        hu = xh * yu
        return stack(delta * grid.ddx(hu),
                     0.5 * delta * zeta * yh + delta * grid.ddy(hu),
                     0.5 * delta * grid.ddx(xh * yh))
    if j == 3:
        hh = xh * yh
        c = -0.375 * delta * delta
        return stack(c * grid.ddx(hh), c * grid.ddy(hh), np.zeros_like(hh))
    raise ValueError(f"unknown quadratic term index {j}")


def affine_term(grid: Grid2D, w, kind: str, index: int, delta: float = DELTA) -> np.ndarray:
    """Dispatch to ``linear_term`` (kind ``"A"``) or ``quadratic_term`` (``"H"``)."""
    if kind == "A":
        return linear_term(grid, w, index, delta)
    if kind == "H":
        return quadratic_term(grid, w, index, delta)
    raise ValueError(f"unknown term kind {kind!r}")


def affine_rhs(grid: Grid2D, w, p: PhysicalParams) -> np.ndarray:
    """Right-hand side reassembled from the six affine pieces."""
    a, e = alpha(p.theta), eta(p.theta)
    out = sum(a[i - 1] * linear_term(grid, w, i, p.delta) for i in LINEAR_TERMS)
    for j in QUADRATIC_TERMS:
        out = out + e[j - 1] * quadratic_term(grid, w, j, p.delta)
    return out


# Dense assembly, used only as a test oracle on small grids.

def _check_cap(grid):
    n = 3 * grid.size
    if n > DENSE_ORACLE_CAP:
        raise ValueError(f"dense assembly refused: N={n} exceeds cap {DENSE_ORACLE_CAP}")
    return n


def assemble_linear(grid: Grid2D, i: int, delta: float = DELTA) -> np.ndarray:
    """Dense ``N x N`` matrix of ``A_i`` built column by column from unit vectors."""
    n = _check_cap(grid)
    return linear_term(grid, np.eye(n), i, delta).T


def assemble_quadratic(grid: Grid2D, j: int, delta: float = DELTA) -> sparse.csr_matrix:
    """Sparse ``N x N^2`` matrix ``H_j`` with ``H_j (w kron w) = Q_j(w)``.

    Entries are recovered by polarization,
    ``B(e_a, e_b) = (Q(e_a + e_b) - Q(e_a) - Q(e_b)) / 2``.
    """
    n = _check_cap(grid)
    eye = np.eye(n)
    q_unit = quadratic_term(grid, eye, j, delta)  # row a: Q(e_a)
    blocks = []
    for a in range(n):
        qs = quadratic_term(grid, eye + eye[a], j, delta)  # row b: Q(e_a + e_b)
        b_ab = 0.5 * (qs - q_unit[a] - q_unit)
        blocks.append(sparse.csr_matrix(b_ab.T))  # N x N, column b
    return sparse.hstack(blocks, format="csr")


def dense_rhs(grid: Grid2D, w, p: PhysicalParams, operators=None) -> np.ndarray:
    """``A(mu) w + H(mu)(w kron w)`` from the assembled operators."""
    if operators is None:
        operators = assemble_all(grid, p.delta)
    a_ops, h_ops = operators
    a, e = alpha(p.theta), eta(p.theta)
    w = np.asarray(w, dtype=float)
    ww = np.kron(w, w)
    out = sum(a[i] * (a_ops[i] @ w) for i in range(3))
    for j in range(3):
        out = out + e[j] * (h_ops[j] @ ww)
    return out


def assemble_all(grid: Grid2D, delta: float = DELTA):
    return ([assemble_linear(grid, i, delta) for i in LINEAR_TERMS],
            [assemble_quadratic(grid, j, delta) for j in QUADRATIC_TERMS])


# Initial conditions.

def _canonical(u, v, h, p: PhysicalParams):
    ox, oy, _ = p.omega
    half = p.hb + 0.5 * h
    return u + p.delta * oy * half, v - p.delta * ox * half


def geostrophic_grid(n: int = 100) -> Grid2D:
    return Grid2D(n, n, -5.0, 5.0, -5.0, 5.0)


def shear_grid(n: int = 100) -> Grid2D:
    return Grid2D(n, n, 0.0, 10.0, 0.0, 10.0)


def initial_geostrophic(grid: Grid2D, theta: float, delta: float = DELTA) -> np.ndarray:
    """Motionless layer with a Gaussian bulge in the height on [-5, 5]^2."""
    if (grid.x0, grid.x1, grid.y0, grid.y1) != (-5.0, 5.0, -5.0, 5.0):
        raise ValueError("geostrophic adjustment is posed on [-5, 5] x [-5, 5]")
    p = PhysicalParams(theta, delta)
    x, y = grid.coords()
    h = 1.0 + 0.5 * np.exp(-(0.8 * x) ** 2 - (0.8 * y) ** 2)
    zero = np.zeros_like(h)
    ut, vt = _canonical(zero, zero, h, p)
    return stack(ut, vt, h)


def initial_shear(grid: Grid2D, theta: float, delta: float = DELTA,
                  dh: float = 0.2, dy: float = 0.5, length: float = 10.0) -> np.ndarray:
    """Perturbed zonal shear layer in geostrophic balance on [0, 10]^2."""
    if (grid.x0, grid.x1, grid.y0, grid.y1) != (0.0, length, 0.0, length):
        raise ValueError(f"shear instability is posed on [0, {length}]^2")
    p = PhysicalParams(theta, delta)
    oz = p.omega[2]
    if oz == 0.0:
        raise ValueError("shear initial condition needs sin(theta) != 0")
    x, y = grid.coords()
    k = 2.0 * np.pi / length
    phase = k * (y - dy * np.sin(k * x))
    h = 1.0 + dh * np.sin(phase)
    u = -k * dh / oz * np.cos(phase)
    v = -k * k * dh * dy / oz * np.cos(phase) * np.cos(k * x)
    ut, vt = _canonical(u, v, h, p)
    return stack(ut, vt, h)


def potential_vorticity(grid: Grid2D, w, theta: float) -> np.ndarray:
    """``q = (Omega^z + vt_x - ut_y) / h`` as a (..., ny, nx) field."""
    ut, vt, h = split(grid, w)
    return (np.sin(theta) + grid.ddx(vt) - grid.ddy(ut)) / h
