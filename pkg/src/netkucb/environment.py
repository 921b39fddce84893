"""Ground-truth bandit environments with exact regret accounting.

The reward function lives in the RKHS of the composed kernel as a finite
kernel expansion over anchor points, rescaled so its RKHS norm is exactly
the declared bound.  All randomness flows through per-(trial, agent, round,
purpose) streams derived from one master seed, so different policies face
bitwise-identical environments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import (
    AugmentedContext,
    ComposedKernel,
    build_gram,
    kernel_matrix,
)

# purpose tags for derived random streams
TAG_GRAPH = 0
TAG_ZMODEL = 1
TAG_ANCHORS = 2
TAG_DECISIONS = 3
TAG_NOISE = 4
TAG_SELECT = 5


def derived_rng(master_seed: int, trial: int, tag: int, a: int = 0,
                b: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for one (trial, purpose, agent, round)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial, tag, a, b))
    return np.random.Generator(np.random.PCG64(ss))


def sample_unit_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n points uniform in the closed unit ball of R^dim."""
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.random(n) ** (1.0 / dim)
    return g * radii[:, None]


def sample_unit_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """F(z, x) = sum_j alpha_j K((z, x), anchor_j) with ||F|| = B exactly."""

    anchors_z: np.ndarray
    anchors_x: np.ndarray
    alpha: np.ndarray
    ck: ComposedKernel
    B: float

    def value(self, z, x) -> float:
        return float(self.values(z, np.asarray(x, float)[None, :])[0])

    def values(self, z, arms: np.ndarray) -> np.ndarray:
        """F(z, x_i) for every row x_i of ``arms``."""
        z = np.asarray(z, dtype=float)
        kz = kernel_matrix(self.ck.network, z[None, :], self.anchors_z)[0]
        kx = kernel_matrix(self.ck.action, np.asarray(arms, float), self.anchors_x)
        return (kx * kz[None, :]) @ self.alpha

    def rkhs_norm(self) -> float:
        pts = [
            AugmentedContext(z=self.anchors_z[j], x=self.anchors_x[j])
            for j in range(len(self.alpha))
        ]
        G = build_gram(self.ck, pts)
        return float(np.sqrt(self.alpha @ G @ self.alpha))


def make_ground_truth(ck: ComposedKernel, m: int, B: float, seed_rng,
                      z_pool: np.ndarray, dim_x: int,
                      max_retries: int = 16) -> GroundTruth:
    """Sample an RKHS reward function with norm exactly B.

    Anchor action parts are uniform in the unit ball; anchor network parts
    are drawn from the agents' actual context vectors so the function varies
    where agents live.  Weights are standard normal, rescaled to the target
    norm; a degenerate (zero-norm) draw is resampled.
    """
    if m < 1:
        raise ValueError("need at least one anchor")
    if not B > 0:
        raise ValueError("norm bound must be positive")
    if not ck.network_is_spec:
        raise ValueError("ground truth requires an oracle network kernel")
    rng = seed_rng if isinstance(seed_rng, np.random.Generator) else \
        np.random.Generator(np.random.PCG64(seed_rng))
    z_pool = np.asarray(z_pool, dtype=float)
    for _ in range(max_retries):
        ax = sample_unit_ball(rng, m, dim_x)
        az = z_pool[rng.integers(0, len(z_pool), size=m)]
        alpha = rng.standard_normal(m)
        pts = [AugmentedContext(z=az[j], x=ax[j]) for j in range(m)]
        G = build_gram(ck, pts)
        norm_sq = float(alpha @ G @ alpha)
        if norm_sq > 1e-12:
            alpha = alpha * (B / np.sqrt(norm_sq))
            return GroundTruth(anchors_z=az, anchors_x=ax, alpha=alpha,
                               ck=ck, B=B)
    raise ValueError("anchor Gram stayed degenerate after retries")


def reward(gt: GroundTruth, point: AugmentedContext, R: float,
           rng: np.random.Generator) -> float:
    """Noisy observation F(point) + Gaussian(0, R^2)."""
    if R < 0:
        raise ValueError("noise scale must be nonnegative")
    value = gt.value(point.z, point.x)
    if R == 0:
        return value
    return value + R * float(rng.standard_normal())


def instant_regret(gt: GroundTruth, z_v, decision_set: np.ndarray,
                   chosen: int) -> float:
    """Gap between the best available action's true value and the chosen one."""
    decision_set = np.asarray(decision_set, dtype=float)
    if decision_set.ndim != 2 or len(decision_set) == 0:
        raise ValueError("decision set must be a nonempty (k, d) array")
    f = gt.values(z_v, decision_set)
    return float(np.max(f) - f[chosen])


def extract_clusters(gpow) -> list[list[int]]:
    """Partition vertices by repeatedly peeling greedy independent sets."""
    remaining = set(range(gpow.V))
    clusters = []
    while remaining:
        chosen = []
        available = set(remaining)
        while available:
            v = min(available)
            chosen.append(v)
            available.discard(v)
            available -= gpow.neighbors(v)
        clusters.append(sorted(chosen))
        remaining -= set(chosen)
    return clusters


def gen_network_contexts(model: str, V: int, dim: int, graph=None,
                         gamma: int = 1, seed_rng=None,
                         cluster_spread: float = 0.5):
    """Network context vectors z_v for each agent under a similarity model.

    identical: one shared scalar unit context (every normalized network
    kernel evaluates to 1, the fully-cooperative reduction).  clustered:
    agents grouped by peeled independent sets of the gamma-power graph share
    a unit representative; representatives are a common base direction plus
    a spread-scaled perturbation, renormalized.  random-unit: i.i.d. uniform
    on the unit sphere.

    Returns (list of z vectors, cluster assignment or None).
    """
    rng = seed_rng if isinstance(seed_rng, np.random.Generator) else \
        np.random.Generator(np.random.PCG64(seed_rng))
    if model == "identical":
        z = np.ones(1)
        return [z.copy() for _ in range(V)], None
    if model == "random-unit":
        zs = sample_unit_sphere(rng, V, dim)
        return [zs[v] for v in range(V)], None
    if model == "clustered":
        if graph is None:
            raise ValueError("clustered model needs the communication graph")
        from .graphs import graph_power

        gpow = graph_power(graph, gamma) if gamma > 1 else graph
        clusters = extract_clusters(gpow)
        base = sample_unit_sphere(rng, 1, dim)[0]
        reps = []
        for _ in clusters:
            bump = sample_unit_sphere(rng, 1, dim)[0]
            rep = base + cluster_spread * bump
            reps.append(rep / np.linalg.norm(rep))
        assignment = np.empty(V, dtype=np.int64)
        for c, members in enumerate(clusters):
            for v in members:
                assignment[v] = c
        return [reps[assignment[v]].copy() for v in range(V)], assignment
    raise ValueError(f"unknown network context model {model!r}")
