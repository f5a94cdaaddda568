"""Tracker tests: RNG pool determinism, PSO updates, particle filter, resampling."""

import math

import numpy as np
import pytest

from mocaplab.optimize import (
    ParticleSet,
    RngPool,
    Swarm,
    TrackerConfig,
    UnnormalizedWeights,
    diffuse,
    init_particles,
    init_swarm,
    omega_schedule,
    pf_resample,
    pf_track_frame,
    pso_iteration,
    pso_track_frame,
)


class ConstPool:
    """Stand-in pool returning a fixed uniform value (for worked examples)."""

    def __init__(self, value):
        self.value = value

    def uniform(self, n):
        return np.full(n, self.value)


# -- RNG pool ------------------------------------------------------------------------


def test_pool_matches_generator_stream_across_refills():
    pool = RngPool(5, block=8)
    want = np.random.default_rng(5).random(20)
    assert np.array_equal(pool.uniform(20), want)


def test_pool_same_seed_same_sequence():
    a = RngPool(42)
    b = RngPool(42)
    assert np.array_equal(a.uniform(100), b.uniform(100))
    assert np.array_equal(a.normal(51), b.normal(51))


def test_pool_reserve_does_not_disturb_the_sequence():
    a = RngPool(7)
    b = RngPool(7)
    b.reserve(10000)
    assert np.array_equal(a.uniform(64), b.uniform(64))


def test_pool_cursor_tracks_consumption():
    pool = RngPool(1)
    assert pool.cursor == 0
    pool.uniform(10)
    assert pool.cursor == 10
    pool.normal(2)  # one Box-Muller pair = 2 uniforms
    assert pool.cursor == 12


def test_pool_odd_normal_discards_trailing_draw():
    pool = RngPool(3)
    pool.normal(3)  # two pairs = 4 uniforms, fourth normal discarded
    assert pool.cursor == 4


def test_pool_box_muller_formula():
    pool = RngPool(11)
    u = np.random.default_rng(11).random(4)
    z = pool.normal(3)
    r0 = math.sqrt(-2.0 * math.log(1.0 - u[0]))
    r1 = math.sqrt(-2.0 * math.log(1.0 - u[2]))
    want = [
        r0 * math.cos(2.0 * math.pi * u[1]),
        r0 * math.sin(2.0 * math.pi * u[1]),
        r1 * math.cos(2.0 * math.pi * u[3]),
    ]
    assert np.allclose(z, want[:3], atol=1e-15)


def test_pool_normal_statistics():
    z = RngPool(17).normal(100000)
    assert abs(z.mean()) < 3.0 / math.sqrt(100000)
    assert abs(z.var() - 1.0) < 0.02


# -- diffusion ------------------------------------------------------------------------


def test_diffuse_zero_sigma_is_exact():
    x = np.array([1.0, -2.0, 3.0])
    out = diffuse(x, 0.0, RngPool(0), -10.0, 10.0)
    assert np.array_equal(out, x)


def test_diffuse_sample_mean_near_center():
    n = 100000
    out = diffuse(np.zeros(n), 2.0, RngPool(23), -100.0, 100.0)
    assert abs(out.mean()) < 3.0 * 2.0 / math.sqrt(n)


def test_diffuse_respects_limits():
    x = np.full(1000, 5.0)
    out = diffuse(x, 3.0, RngPool(29), -5.0, 5.0)
    assert (out <= 5.0).all()
    assert (out >= -5.0).all()
    assert (out < 5.0).any()


# -- PSO -------------------------------------------------------------------------------


def one_particle_swarm(x, v, p, fp, g, fg):
    return Swarm(
        x=np.array([[float(x)]]),
        v=np.array([[float(v)]]),
        p_best=np.array([[float(p)]]),
        f_best=np.array([float(fp)]),
        g=np.array([float(g)]),
        f_g=float(fg),
    )


def test_pso_velocity_worked_example():
    s = one_particle_swarm(x=0, v=0, p=1, fp=0.5, g=2, fg=0.9)
    pso_iteration(s, np.array([0.1]), ConstPool(0.5), omega=1.0, c1=2.0, c2=2.0,
                  lo=-10.0, hi=10.0)
    assert s.v[0, 0] == 3.0
    assert s.x[0, 0] == 3.0


def test_pso_inertia_only():
    s = one_particle_swarm(x=4, v=2, p=4, fp=0.5, g=4, fg=0.9)
    pso_iteration(s, np.array([0.1]), ConstPool(0.3), omega=0.5, c1=0.0, c2=0.0,
                  lo=-10.0, hi=10.0)
    assert s.v[0, 0] == 1.0
    assert s.x[0, 0] == 5.0


def test_pso_zero_attraction_at_coincident_points():
    for r in (0.0, 0.25, 0.9):
        s = one_particle_swarm(x=2, v=1.5, p=2, fp=0.5, g=2, fg=0.9)
        pso_iteration(s, np.array([0.1]), ConstPool(r), omega=0.6, c1=2.0, c2=2.0,
                      lo=-10.0, hi=10.0)
        assert np.isclose(s.v[0, 0], 0.9)


def test_pso_strict_improvement_keeps_incumbent_on_tie():
    s = one_particle_swarm(x=7, v=0, p=1, fp=0.5, g=1, fg=0.5)
    pso_iteration(s, np.array([0.5]), ConstPool(0.5), omega=0.5, c1=0.0, c2=0.0,
                  lo=-10.0, hi=10.0)
    assert s.p_best[0, 0] == 1.0
    assert s.f_best[0] == 0.5
    assert s.g[0] == 1.0


def test_pso_better_score_replaces_best():
    s = one_particle_swarm(x=7, v=0, p=1, fp=0.5, g=1, fg=0.5)
    pso_iteration(s, np.array([0.8]), ConstPool(0.5), omega=0.5, c1=0.0, c2=0.0,
                  lo=-10.0, hi=10.0)
    assert s.p_best[0, 0] == 7.0
    assert s.g[0] == 7.0
    assert s.f_g == 0.8


def test_pso_global_best_tracks_max_personal_best():
    rng = np.random.default_rng(71)
    pool = RngPool(71)
    sigma = np.full(3, 1.0)
    swarm = init_swarm(np.zeros(3), 12, sigma, pool, -5.0, 5.0)
    last = -np.inf
    for _ in range(6):
        scores = rng.random(12)
        pso_iteration(swarm, scores, pool, 0.5, 1.5, 1.5, -5.0, 5.0)
        assert swarm.f_g == swarm.f_best.max()
        assert swarm.f_g >= last
        last = swarm.f_g


def test_init_swarm_keeps_center_unperturbed():
    pool = RngPool(5)
    center = np.array([1.0, 2.0, 3.0])
    swarm = init_swarm(center, 8, np.full(3, 0.5), pool, -10.0, 10.0)
    assert np.array_equal(swarm.x[0], center)
    assert not np.array_equal(swarm.x[1], center)
    assert np.array_equal(swarm.v, np.zeros((8, 3)))


def test_omega_schedule_is_linear():
    cfg = TrackerConfig(omega=(0.8, 0.4), iterations=5)
    assert omega_schedule(cfg, 0) == 0.8
    assert omega_schedule(cfg, 4) == 0.4
    assert np.isclose(omega_schedule(cfg, 2), 0.6)
    assert omega_schedule(TrackerConfig(omega=(0.7, 0.1), iterations=1), 0) == 0.7


def test_pso_zero_iterations_passes_previous_best_through():
    cfg = TrackerConfig(iterations=0, particles=8, seed=1)
    prev = np.array([3.0, -1.0])
    best, score = pso_track_frame(
        prev, lambda xs: np.zeros(len(xs)), cfg, RngPool(1),
        -10.0, 10.0, np.full(2, 1.0),
    )
    assert np.array_equal(best, prev)
    assert score == -np.inf


def test_pso_elitism_never_loses_to_previous_best():
    opt = np.array([0.7, -2.1, 1.4])

    def ev(xs):
        return -((xs - opt) ** 2).sum(axis=1)

    prev = np.array([2.0, 2.0, -3.0])
    cfg = TrackerConfig(particles=16, iterations=5, seed=3)
    best, score = pso_track_frame(prev, ev, cfg, RngPool(3), -5.0, 5.0,
                                  np.full(3, 1.0))
    assert score >= ev(prev[None])[0]


def test_pso_finds_sphere_optimum():
    opt = np.array([1.2, -0.3, 2.0, 0.5, -1.7])

    def ev(xs):
        return -((xs - opt) ** 2).sum(axis=1)

    errs = []
    for seed in range(3):
        cfg = TrackerConfig(particles=96, iterations=20, seed=seed)
        best, _ = pso_track_frame(np.zeros(5), ev, cfg, RngPool(seed),
                                  -5.0, 5.0, np.full(5, 1.0))
        errs.append(np.abs(best - opt).max())
    assert min(errs) < 1e-3
    assert max(errs) < 1e-2


def test_pso_track_frame_is_deterministic():
    def ev(xs):
        return -(xs**2).sum(axis=1)

    cfg = TrackerConfig(particles=24, iterations=6, seed=9)
    a, sa = pso_track_frame(np.ones(4), ev, cfg, RngPool(9), -5.0, 5.0,
                            np.full(4, 0.5))
    b, sb = pso_track_frame(np.ones(4), ev, cfg, RngPool(9), -5.0, 5.0,
                            np.full(4, 0.5))
    assert np.array_equal(a, b)
    assert sa == sb


# -- particle filter ---------------------------------------------------------------------


def test_init_particles_tiles_center_with_uniform_weights():
    ps = init_particles(np.array([1.0, 2.0]), 5)
    assert ps.x.shape == (5, 2)
    assert (ps.x == [1.0, 2.0]).all()
    assert np.allclose(ps.w, 0.2)


def test_resample_worked_trace():
    ps = ParticleSet(
        x=np.arange(4, dtype=np.float64)[:, None],
        w=np.array([0.5, 0.5, 0.0, 0.0]),
    )
    new, idx = pf_resample(ps, ConstPool(0.4))  # offset u1 = 0.4 / 4 = 0.1
    assert list(idx) == [0, 0, 1, 1]
    assert np.allclose(new.w, 0.25)


def test_resample_degenerate_weight_copies_single_particle():
    ps = ParticleSet(
        x=np.arange(4, dtype=np.float64)[:, None],
        w=np.array([1.0, 0.0, 0.0, 0.0]),
    )
    for u in (0.05, 0.5, 0.95):
        new, idx = pf_resample(ps, ConstPool(u))
        assert list(idx) == [0, 0, 0, 0]
        assert (new.x == 0.0).all()


def test_resample_uniform_weights_preserve_multiset():
    rng = np.random.default_rng(83)
    x = rng.normal(size=(16, 3))
    ps = ParticleSet(x=x, w=np.full(16, 1.0 / 16.0))
    new, idx = pf_resample(ps, RngPool(83))
    assert sorted(idx) == list(range(16))
    assert np.array_equal(np.sort(new.x, axis=0), np.sort(x, axis=0))


def test_resample_counts_match_weights_within_one():
    rng = np.random.default_rng(89)
    n = 1000
    w = rng.dirichlet(np.ones(n))
    ps = ParticleSet(x=np.arange(n, dtype=np.float64)[:, None], w=w)
    new, idx = pf_resample(ps, RngPool(89))
    counts = np.bincount(idx, minlength=n)
    assert np.abs(counts - n * w).max() <= 1.0 + 1e-9
    assert abs(new.w.sum() - 1.0) < 1e-12


def test_resample_rejects_unnormalized_weights():
    ps = ParticleSet(x=np.zeros((4, 1)), w=np.array([0.5, 0.2, 0.1, 0.1]))
    with pytest.raises(UnnormalizedWeights):
        pf_resample(ps, RngPool(0))


def test_pf_estimate_follows_dominant_particle():
    x = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 9.0]])
    ps = ParticleSet(x=x.copy(), w=np.full(3, 1.0 / 3.0))

    def ev(xs):
        return (np.abs(xs - [5.0, 5.0]).sum(axis=1) < 1e-9).astype(float)

    cfg = TrackerConfig(algorithm="pf", particles=3, sigma_z=0.1, seed=0)
    frame = pf_track_frame(ps, ev, cfg, RngPool(0), -100.0, 100.0, 0.0)
    assert np.allclose(frame.pose, [5.0, 5.0], atol=1e-9)
    assert frame.score == 1.0
    assert not frame.degenerate
    assert (frame.particles.x == [5.0, 5.0]).all()


def test_pf_equal_scores_give_unweighted_mean():
    x = np.array([[0.0], [2.0], [10.0]])
    ps = ParticleSet(x=x.copy(), w=np.full(3, 1.0 / 3.0))
    cfg = TrackerConfig(algorithm="pf", particles=3, seed=0)
    frame = pf_track_frame(
        ps, lambda xs: np.full(len(xs), 0.7), cfg, RngPool(1),
        -100.0, 100.0, 0.0,
    )
    assert np.allclose(frame.pose, [4.0], atol=1e-12)
    assert np.array_equal(np.sort(frame.particles.x, axis=0), np.sort(x, axis=0))


def test_pf_all_zero_weights_reset_uniform_and_flag():
    ps = init_particles(np.zeros(2), 4)
    cfg = TrackerConfig(algorithm="pf", particles=4, sigma_z=0.1, seed=0)
    frame = pf_track_frame(
        ps, lambda xs: np.full(len(xs), -40.0), cfg, RngPool(2),
        -100.0, 100.0, 0.0,
    )
    assert frame.degenerate
    assert np.allclose(frame.particles.w, 0.25)


def test_pf_estimate_stays_within_limits():
    ps = init_particles(np.full(3, 4.9), 32)
    cfg = TrackerConfig(algorithm="pf", particles=32, seed=0)
    frame = pf_track_frame(
        ps, lambda xs: np.random.default_rng(0).random(len(xs)), cfg,
        RngPool(3), -5.0, 5.0, np.full(3, 2.0),
    )
    assert (frame.pose <= 5.0).all()
    assert (frame.pose >= -5.0).all()
    assert (frame.particles.x <= 5.0).all()


def test_pf_track_frame_is_deterministic():
    def ev(xs):
        return 1.0 / (1.0 + (xs**2).sum(axis=1))

    a = pf_track_frame(init_particles(np.ones(3), 16), ev,
                       TrackerConfig(algorithm="pf", seed=4), RngPool(4),
                       -5.0, 5.0, np.full(3, 0.3))
    b = pf_track_frame(init_particles(np.ones(3), 16), ev,
                       TrackerConfig(algorithm="pf", seed=4), RngPool(4),
                       -5.0, 5.0, np.full(3, 0.3))
    assert np.array_equal(a.pose, b.pose)
    assert np.array_equal(a.particles.x, b.particles.x)


# -- configuration -------------------------------------------------------------------------


def test_tracker_config_validation():
    with pytest.raises(ValueError):
        TrackerConfig(algorithm="annealed")
    with pytest.raises(ValueError):
        TrackerConfig(particles=0)
    with pytest.raises(ValueError):
        TrackerConfig(iterations=-1)


def test_tracker_config_scalar_omega_broadcasts():
    cfg = TrackerConfig(omega=0.5)
    assert cfg.omega == (0.5, 0.5)


def test_resolve_sigma_defaults_by_dof_kind(model):
    sig = TrackerConfig().resolve_sigma(model)
    translations = model.dof_slot < 3
    assert (sig[translations] == 30.0).all()
    assert (sig[~translations] == 0.1).all()


def test_resolve_sigma_scalar_and_vector(model):
    assert (TrackerConfig(sigma=0.25).resolve_sigma(model) == 0.25).all()
    vec = np.linspace(0.1, 1.0, model.n_dof)
    assert np.array_equal(TrackerConfig(sigma=vec).resolve_sigma(model), vec)
    with pytest.raises(ValueError):
        TrackerConfig(sigma=np.ones(model.n_dof + 1)).resolve_sigma(model)
