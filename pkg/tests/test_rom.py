import numpy as np
import pytest

from swrom import ntswe, pod, rom
from swrom.grid import Grid2D
from swrom.integrate import IntegrationError, IntegratorConfig, integrate
from swrom.pod import PodBasis
from swrom.rom import ReducedAffineModel

from conftest import rel


def random_model(rng, r=3, scale=1.0):
    return ReducedAffineModel([scale * rng.standard_normal((r, r)) for _ in range(3)],
                              [scale * rng.standard_normal((r, r * r)) for _ in range(3)], label="rand")


def test_zero_state_has_zero_rhs(rng):
    assert np.all(random_model(rng).rhs(np.zeros(3), 0.7) == 0)


def test_zero_operators_keep_state_constant():
    r = 4
    m = ReducedAffineModel([np.zeros((r, r))] * 3, [np.zeros((r, r * r))] * 3)
    w0 = np.arange(1.0, r + 1)
    traj = rom.simulate(m, w0, 0.5, IntegratorConfig(t_end=1.0))
    assert np.all(traj.states == w0[:, None])


def test_rhs_matches_nested_loops(rng):
    m, r, mu = random_model(rng), 3, 0.9
    w = rng.standard_normal(r)
    a, e = ntswe.alpha(mu), ntswe.eta(mu)
    expect = np.zeros(r)
    for i in range(r):
        for k in range(3):
            expect[i] += a[k] * sum(m.A_hats[k][i, b] * w[b] for b in range(r))
            expect[i] += e[k] * sum(m.H_hats[k][i, b * r + c] * w[b] * w[c]
                                    for b in range(r) for c in range(r))
    np.testing.assert_allclose(m.rhs(w, mu), expect, rtol=1e-13)
    np.testing.assert_allclose(rom.rom_rhs(m, w, mu), expect, rtol=1e-13)
    np.testing.assert_allclose(m.rhs_function(mu)(w), expect, rtol=1e-13)


def test_full_rank_rom_reproduces_fom(rng):
    g = Grid2D(4, 4, -5.0, 5.0, -5.0, 5.0)
    n, theta = 3 * g.size, np.pi / 4
    w0 = 0.05 * rng.standard_normal(n)
    w0[2 * g.size:] += 1.0
    V = np.linalg.qr(rng.standard_normal((n, n)))[0]
    m = pod.intrusive_reduce(PodBasis(V, np.ones(n)), g)
    cfg = IntegratorConfig(t_end=1.0, rtol=1e-11, atol=1e-11)
    p = ntswe.PhysicalParams(theta)
    fom = integrate(lambda w: ntswe.rhs(g, w, p), w0, cfg)
    red = rom.simulate(m, V.T @ w0, theta, cfg)
    assert rel(rom.lift(V, red.states), fom.states) < 1e-6


def test_lift(rng):
    V = rng.standard_normal((6, 2))
    X = rng.standard_normal((2, 5))
    np.testing.assert_array_equal(rom.lift(V, X), V @ X)
    with pytest.raises(ValueError):
        rom.lift(V, np.zeros((3, 5)))


def test_stacked_round_trip(rng):
    m = random_model(rng, r=4)
    X = m.stacked()
    assert X.shape == (4, 12 + 48)
    back = ReducedAffineModel.from_stacked(X, 4)
    np.testing.assert_array_equal(back.stacked(), X)
    with pytest.raises(ValueError):
        ReducedAffineModel.from_stacked(X, 3)


def test_truncate_keeps_leading_block(rng):
    m = random_model(rng, r=4)
    t = m.truncate(2)
    w = np.array([0.3, -0.7])
    full = m.rhs(np.r_[w, 0, 0], 0.6)[:2]
    np.testing.assert_allclose(t.rhs(w, 0.6), full, rtol=1e-14)
    with pytest.raises(ValueError):
        m.truncate(5)


def test_save_load(tmp_path, rng):
    m = random_model(rng)
    m.diagnostics = {"effective_rank": 7}
    m.save(tmp_path / "m.opsw")
    back = ReducedAffineModel.load(tmp_path / "m.opsw")
    assert back.stacked().tobytes() == m.stacked().tobytes()
    assert back.label == "rand" and back.diagnostics == {"effective_rank": 7}


def test_validation(rng):
    r = 2
    A, H = [np.zeros((r, r))] * 3, [np.zeros((r, r * r))] * 3
    with pytest.raises(ValueError):
        ReducedAffineModel(A[:2], H)
    with pytest.raises(ValueError):
        ReducedAffineModel(A, [np.zeros((r, r))] * 3)
    with pytest.raises(ValueError):
        ReducedAffineModel([np.full((r, r), np.nan)] + A[1:], H)
    with pytest.raises(ValueError):
        rom.simulate(random_model(rng), np.zeros(4), 0.5, IntegratorConfig(t_end=1.0))


def test_unstable_model_blow_up_is_reported():
    r = 1
    m = ReducedAffineModel([np.zeros((r, r))] * 3, [np.ones((r, 1)), np.zeros((r, 1)), np.zeros((r, 1))])
    with pytest.raises(IntegrationError):
        rom.simulate(m, np.ones(1), 0.5, IntegratorConfig(t_end=3.0))
