"""Per-frame pose search: particle swarm and a bootstrap particle filter.

All randomness flows through RngPool, a seeded pre-generated pool of
uniform(0, 1) draws consumed through a sequential cursor (normals via
Box-Muller). Every draw happens on the caller's thread before any parallel
evaluation fans out, so trajectories depend only on the seed, never on the
worker count.
"""

import math
from dataclasses import dataclass, field

import numpy as np


class UnnormalizedWeights(ValueError):
    """Particle weights do not sum to 1."""


class RngPool:
    """Seeded pool of uniform draws with a sequential cursor.

    The pool auto-extends in blocks from the same generator stream, so the
    draw sequence depends only on the seed and the request sizes.
    """

    def __init__(self, seed, block=8192):
        self.seed = seed
        self._gen = np.random.default_rng(seed)
        self._block = int(block)
        self._pool = self._gen.random(self._block)
        self._cursor = 0
        self._consumed = 0

    @property
    def size(self):
        return self._pool.size

    @property
    def cursor(self):
        """Total draws consumed since construction."""
        return self._consumed

    def reserve(self, n):
        """Ensure n draws are available without another refill.

        Consumed draws are dropped on refill so the pool stays small; the
        emitted sequence is the generator stream regardless of chunking.
        """
        remaining = self._pool.size - self._cursor
        if remaining < n:
            grow = max(self._block, n - remaining)
            self._pool = np.concatenate(
                [self._pool[self._cursor :], self._gen.random(grow)]
            )
            self._cursor = 0

    def uniform(self, n):
        """Next n uniform(0, 1) draws."""
        self.reserve(n)
        out = self._pool[self._cursor : self._cursor + n]
        self._cursor += n
        self._consumed += n
        return out.copy()

    def normal(self, n):
        """Next n standard normals via Box-Muller.

        Uniforms are consumed in pairs; for odd n the trailing second normal
        of the last pair is discarded.
        """
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1]: keeps log() finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * math.pi * u2)
        z[1::2] = r * np.sin(2.0 * math.pi * u2)
        return z[:n]


def diffuse(x, sigma, pool, lo, hi):
    """Gaussian perturbation of a pose, clamped to joint limits."""
    x = np.asarray(x, dtype=np.float64)
    z = pool.normal(x.size)
    return np.clip(x + sigma * z, lo, hi)


@dataclass
class TrackerConfig:
    algorithm: str = "pso"
    particles: int = 96
    iterations: int = 10
    # heavily damped defaults: attraction c1 + c2 near 2 (1 + sqrt(omega))^2
    # contracts the swarm fast enough for short per-frame iteration budgets
    omega: tuple = (0.16, 0.16)  # linear decay across iterations
    c1: float = 1.96
    c2: float = 1.96
    sigma: object = None  # scalar or per-DoF array; None = model default
    sigma_z: float = 0.1
    seed: int = 0
    initial_pose: object = None

    def __post_init__(self):
        if self.algorithm not in ("pso", "pf"):
            raise ValueError("algorithm must be 'pso' or 'pf'")
        if self.particles < 1 or self.iterations < 0:
            raise ValueError("need particles >= 1 and iterations >= 0")
        if isinstance(self.omega, (int, float)):
            self.omega = (float(self.omega), float(self.omega))
        else:
            self.omega = (float(self.omega[0]), float(self.omega[1]))

    def resolve_sigma(self, model):
        """Per-DoF diffusion scale: 30 mm translations, 0.1 rad rotations."""
        if self.sigma is None:
            s = np.where(model.dof_slot < 3, 30.0, 0.1)
        elif np.isscalar(self.sigma):
            s = np.full(model.n_dof, float(self.sigma))
        else:
            s = np.asarray(self.sigma, dtype=np.float64)
            if s.shape != (model.n_dof,):
                raise ValueError(f"sigma needs {model.n_dof} entries")
        return s


@dataclass
class Swarm:
    x: np.ndarray  # (N, D) positions
    v: np.ndarray  # (N, D) velocities
    p_best: np.ndarray  # (N, D) personal bests
    f_best: np.ndarray  # (N,) personal best scores
    g: np.ndarray  # (D,) global best
    f_g: float


def init_swarm(center, n, sigma, pool, lo, hi):
    """Particle 0 carries the center unperturbed; the rest diffuse around it."""
    center = np.asarray(center, dtype=np.float64)
    d = center.size
    x = np.empty((n, d))
    x[0] = center
    if n > 1:
        z = pool.normal((n - 1) * d).reshape(n - 1, d)
        x[1:] = np.clip(center + sigma * z, lo, hi)
    return Swarm(
        x=x,
        v=np.zeros((n, d)),
        p_best=x.copy(),
        f_best=np.full(n, -np.inf),
        g=x[0].copy(),
        f_g=-np.inf,
    )


def pso_iteration(swarm, scores, pool, omega, c1, c2, lo, hi):
    """Synchronous swarm step: update bests from scores, then move.

    Personal and global bests replace only on strictly better scores, so
    ties keep the incumbent. r1, r2 are fresh per particle per dimension.
    """
    n, d = swarm.x.shape
    better = scores > swarm.f_best
    swarm.p_best[better] = swarm.x[better]
    swarm.f_best[better] = scores[better]
    i = int(np.argmax(swarm.f_best))
    if swarm.f_best[i] > swarm.f_g:
        swarm.g = swarm.p_best[i].copy()
        swarm.f_g = float(swarm.f_best[i])
    r1 = pool.uniform(n * d).reshape(n, d)
    r2 = pool.uniform(n * d).reshape(n, d)
    swarm.v = (
        omega * swarm.v
        + c1 * r1 * (swarm.p_best - swarm.x)
        + c2 * r2 * (swarm.g - swarm.x)
    )
    swarm.x = np.clip(swarm.x + swarm.v, lo, hi)
    return swarm


def omega_schedule(cfg, k):
    """Inertia at iteration k, decaying linearly start -> end."""
    start, end = cfg.omega
    if cfg.iterations <= 1:
        return start
    return start + (end - start) * k / (cfg.iterations - 1)


def pso_track_frame(prev_best, evaluate, cfg, pool, lo, hi, sigma):
    """One tracked frame by PSO re-diffused around the previous estimate.

    Returns (pose, score). With zero iterations the previous estimate passes
    through unevaluated.
    """
    swarm = init_swarm(prev_best, cfg.particles, sigma, pool, lo, hi)
    if cfg.iterations == 0:
        return np.asarray(prev_best, dtype=np.float64).copy(), -np.inf
    for k in range(cfg.iterations):
        scores = np.asarray(evaluate(swarm.x), dtype=np.float64)
        pso_iteration(swarm, scores, pool, omega_schedule(cfg, k), cfg.c1, cfg.c2, lo, hi)
    return swarm.g, swarm.f_g


@dataclass
class ParticleSet:
    x: np.ndarray  # (N, D)
    w: np.ndarray  # (N,)


def init_particles(center, n):
    center = np.asarray(center, dtype=np.float64)
    return ParticleSet(
        x=np.tile(center, (n, 1)), w=np.full(n, 1.0 / n)
    )


def pf_resample(ps, pool):
    """Systematic resampling: N evenly spaced picks with one random offset.

    Returns (new set with uniform weights, selected indices).
    """
    n = ps.w.size
    if abs(float(ps.w.sum()) - 1.0) > 1e-9:
        raise UnnormalizedWeights(f"weights sum to {ps.w.sum()}")
    c = np.cumsum(ps.w)
    u1 = pool.uniform(1)[0] / n
    u = u1 + np.arange(n) / n
    idx = np.minimum(np.searchsorted(c, u, side="left"), n - 1)
    return ParticleSet(x=ps.x[idx].copy(), w=np.full(n, 1.0 / n)), idx


@dataclass
class PfFrame:
    pose: np.ndarray
    score: float
    particles: ParticleSet
    degenerate: bool


def pf_track_frame(ps, evaluate, cfg, pool, lo, hi, sigma):
    """One tracked frame by a bootstrap (SIR) particle filter.

    Predict by Gaussian diffusion, weight by a Gaussian in (1 - fitness),
    estimate by the weighted mean before resampling, then resample
    systematically. All-zero weights reset to uniform and flag the frame.
    """
    n, d = ps.x.shape
    z = pool.normal(n * d).reshape(n, d)
    x = np.clip(ps.x + sigma * z, lo, hi)
    scores = np.asarray(evaluate(x), dtype=np.float64)
    sz = cfg.sigma_z
    w = np.exp(-((1.0 - scores) ** 2) / (sz * sz)) / (sz * math.sqrt(2.0 * math.pi))
    total = float(w.sum())
    degenerate = not np.isfinite(total) or total <= 0.0
    if degenerate:
        w = np.full(n, 1.0 / n)
    else:
        w = w / total
    w = w / w.sum()  # exact renormalization for the resampler's tolerance
    estimate = np.clip(w @ x, lo, hi)
    resampled, _ = pf_resample(ParticleSet(x=x, w=w), pool)
    return PfFrame(
        pose=estimate,
        score=float(scores.max()) if n else 0.0,
        particles=resampled,
        degenerate=degenerate,
    )
