"""Frame-bundle diffusion: transport quality, Q dynamics, exits, h-process."""

import math

import numpy as np
import pytest

from heatgrad import diffusion as dfn
from heatgrad import fields, geometry as geo

EU = geo.euclidean(2)
EU1 = geo.euclidean(1)
SP = geo.sphere(dim=2, radius=1.0)
HY = geo.hyperbolic(dim=2, curvature=1.0)
TO = geo.flat_torus((2 * math.pi, 2 * math.pi))


def test_step_flat_is_plain_euler():
    """Euclidean, Z=0: X advances by sqrt(dt) xi, U and Q do not move."""
    x = np.array([[0.5, -1.0]])
    u = np.eye(2)[None]
    q = np.eye(2)[None]
    xi = np.array([[1.3, -0.4]])
    dt = 1e-2
    xn, un, qn = dfn.step_diffusion(EU, None, (x, u, q), dt, xi)
    assert np.allclose(xn, x + math.sqrt(dt) * xi)
    assert np.array_equal(un, u)
    assert np.allclose(qn, np.eye(2))


def test_q_decay_on_sphere_single_path():
    """Unit S2, Z=0: Q_s = e^{-s/2} Id; midpoint scheme stays within 5 dt."""
    dt = 1e-3
    path = dfn.simulate_path(SP, None, [0.0, 0.0], None, dt, 1.0, seed=7)
    times = path.times
    target = np.exp(-times / 2.0)
    dev = np.abs(path.q_matrices[:, 0, 0] - target)
    off = np.abs(path.q_matrices[:, 0, 1]) + np.abs(path.q_matrices[:, 1, 0])
    assert float(np.max(dev)) < 5 * dt
    assert float(np.max(off)) < 1e-12
    assert abs(path.q_matrices[0, 0, 0] - 1.0) == 0.0  # Q_0 = id


def test_q_growth_on_hyperbolic_respects_bound():
    """Ric = -g: ||Q_s|| <= e^{s/2} + scheme slack; here Q = e^{+s/2} Id."""
    dt = 1e-3
    path = dfn.simulate_path(HY, None, [0.0, 0.0], None, dt, 0.5, seed=3)
    norms = np.linalg.norm(path.q_matrices, ord=2, axis=(1, 2))
    bound = np.exp(0.5 * path.times) + 5 * dt
    assert np.all(norms <= bound)


def test_q_ou_drift_decay():
    """Euclidean with Z = -x: Ric - 2 grad Z = 2 Id, so Q_s = e^{-s} Id."""
    Z = fields.builtin_drift(EU, "ou")
    dt = 1e-3
    path = dfn.simulate_path(EU, Z, [0.2, 0.1], None, dt, 1.0, seed=11)
    target = np.exp(-path.times)
    dev = np.abs(path.q_matrices[:, 0, 0] - target)
    assert float(np.max(dev)) < 5 * dt
    assert float(np.max(np.abs(path.q_matrices[:, 0, 1]))) < 1e-10


def test_frames_stay_orthonormal_along_path():
    for model in (SP, HY):
        path = dfn.simulate_path(model, None, [0.0, 0.0], None, 1e-3, 0.5, seed=5)
        for k in range(0, path.n_steps + 1, 100):
            g = model.metric(path.positions[k])
            gram = path.frames[k].T @ g @ path.frames[k]
            assert np.max(np.abs(gram - np.eye(2))) < 1e-8


def test_whole_manifold_path_has_inf_tau_and_full_length():
    dt = 1e-2
    path = dfn.simulate_path(SP, None, [0.0, 0.0], None, dt, 1.0, seed=2)
    assert math.isinf(path.tau)
    assert path.n_steps == 100


def test_exit_time_monotone_in_domain():
    """Same noise, larger ball: tau can only grow."""
    small = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=0.5)
    big = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=0.8)
    for seed in range(6):
        p_small = dfn.simulate_path(EU, None, [0.0, 0.0], small, 1e-3, 4.0, seed=seed)
        p_big = dfn.simulate_path(EU, None, [0.0, 0.0], big, 1e-3, 4.0, seed=seed)
        assert p_big.tau >= p_small.tau


def test_degenerate_domain_rejected():
    with pytest.raises(geo.GeometryError):
        geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=0.0)
    dom = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=0.5)
    with pytest.raises(dfn.SimulationError):
        # start point on the boundary is not interior
        dfn.simulate_path(EU, None, [0.5, 0.0], dom, 1e-3, 1.0, seed=0)
    with pytest.raises(dfn.SimulationError):
        # dt precondition: dt <= 1e-2 min(1, r0^2)
        dfn.simulate_path(EU, None, [0.0, 0.0], dom, 1e-2, 1.0, seed=0)


def test_reproducibility_bit_identical():
    a = dfn.simulate_path(SP, None, [0.1, 0.0], None, 1e-3, 0.2, seed=42, path_index=9)
    b = dfn.simulate_path(SP, None, [0.1, 0.0], None, 1e-3, 0.2, seed=42, path_index=9)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(a.noise, b.noise)
    c = dfn.simulate_path(SP, None, [0.1, 0.0], None, 1e-3, 0.2, seed=42, path_index=8)
    assert not np.array_equal(a.positions, c.positions)


def test_batch_matches_single_path():
    """Chunk engine and the stored-path loop consume identical noise."""
    dom = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=1.0)
    chunks = list(
        dfn.run_paths(EU, None, [0.0, 0.0], dom, 0.5, 1e-3, 5, seed=19, weight="plain")
    )
    assert len(chunks) == 1
    res = chunks[0]
    for p in range(5):
        path = dfn.simulate_path(EU, None, [0.0, 0.0], dom, 1e-3, 0.5, seed=19, path_index=p)
        end = path.positions[-1]
        assert np.allclose(end, res.x_final[p], atol=1e-12)
        assert (path.tau <= 0.5) == bool(res.exited[p])


def test_worker_count_does_not_change_results():
    dom = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=1.0)

    def collect(workers):
        outs = list(
            dfn.run_paths(
                EU, None, [0.0, 0.0], dom, 0.25, 1e-3, 3 * dfn.CHUNK,
                seed=4, weight="plain", workers=workers,
            )
        )
        return np.concatenate([o.x_final for o in outs]), np.concatenate(
            [o.weight_int for o in outs]
        )

    x1, w1 = collect(1)
    x2, w2 = collect(3)
    assert np.array_equal(x1, x2)
    assert np.array_equal(w1, w2)


def test_cutoff_phi_values():
    """phi(center)=1, phi(boundary)=0, and the flat-ball constant
    c = pi^2 (n+3) / (4 r^2) = 5 pi^2 / 4 for n=2, r=1, Z=0."""
    phi_c, c = dfn.cutoff_phi(EU, [0.0, 0.0], 1.0, p=[0.0, 0.0])
    assert phi_c == 1.0
    assert abs(c - 5 * math.pi**2 / 4) < 1e-12
    phi_b, _ = dfn.cutoff_phi(EU, [0.0, 0.0], 1.0, p=[1.0, 0.0])
    assert abs(phi_b) < 1e-12
    with pytest.raises(geo.GeometryError):
        dfn.cutoff_phi(EU, [0.0, 0.0], 1.0, p=[1.5, 0.0])
    # hyperbolic ball picks up the curvature deficiency term
    _, c_hyp = dfn.cutoff_phi(HY, [0.0, 0.0], 1.0, p=[0.0, 0.0])
    assert abs(c_hyp - (math.pi / 2 + 5 * math.pi**2 / 4)) < 1e-12


def test_build_h_invariants():
    """h(0) = 1; h vanishes from sigma(t); hdot <= 0; sigma(t) <= t ^ tau."""
    dom = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=1.0)
    t = 0.25
    for seed in range(8):
        path = dfn.simulate_path(EU, None, [0.0, 0.0], dom, 1e-3, t, seed=seed)
        loc = dfn.build_h(path, 1.0, t)
        assert abs(loc.h[0] - 1.0) < 1e-14
        assert np.all(loc.hdot <= 0.0)
        assert loc.sigma_t <= min(t, path.tau) + 1e-12
        k_sigma = int(round(loc.sigma_t / path.dt))
        assert np.all(np.abs(loc.h[k_sigma:]) < 1e-12)


def test_lemma_bound_on_hdot_square_integral():
    """MC mean of int hdot^2 ds stays below c/(1 - e^{-ct}) + 3 SE."""
    t, dt, n_paths = 0.25, 1e-3, 1500
    dom = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.0, outer_radius=1.0)
    vals = []
    for chunk in dfn.run_paths(
        EU, None, [0.0, 0.0], dom, t, dt, n_paths, seed=123,
        weight="localized", ball_radius=1.0,
    ):
        vals.append(chunk.hdot_sq_int)
    vals = np.concatenate(vals)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    c = dfn.cutoff_phi(EU, [0.0, 0.0], 1.0).c
    rhs = c / (1.0 - math.exp(-c * t))
    assert mean <= rhs + 3 * se


def test_harmonic_mean_preserved_flat():
    """E[u(X_t)] = u(x0) for harmonic u = x1 x2 on the whole plane."""
    u = fields.builtin_function(EU, "x1x2", self_check=False)
    x0 = np.array([0.3, 0.7])
    vals = []
    for chunk in dfn.run_paths(EU, None, x0, None, 0.5, 1e-2, 4000, seed=77):
        vals.append(u.value(chunk.x_final))
    vals = np.concatenate(vals)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    assert abs(mean - u.value(x0[None])[0]) <= 3 * se


def test_exit_time_mean_1d():
    """E[tau] = 1 for Brownian motion (L = 1/2 d^2/dx^2) from 0 in (-1, 1)."""
    dom = geo.DomainSpec(center=(0.0,), inner_radius=0.0, outer_radius=1.0)
    dt, horizon, n_paths = 1e-3, 10.0, 2000
    taus = []
    for chunk in dfn.run_paths(EU1, None, [0.0], dom, horizon, dt, n_paths, seed=31):
        taus.append(np.minimum(chunk.tau, horizon))
    taus = np.concatenate(taus)
    mean = float(np.mean(taus))
    se = float(np.std(taus, ddof=1) / math.sqrt(len(taus)))
    assert abs(mean - 1.0) <= 3 * se + 5 * math.sqrt(dt)


def test_torus_wraps_and_flat_q():
    path = dfn.simulate_path(TO, None, [0.1, 6.2], None, 1e-2, 0.5, seed=9)
    assert np.all(path.positions >= 0.0)
    assert np.all(path.positions < 2 * math.pi)
    assert np.allclose(path.q_matrices, np.eye(2))
