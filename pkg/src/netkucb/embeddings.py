"""Online estimation of the agent-similarity kernel from observed contexts.

Each agent's context distribution is represented by the empirical mean
embedding of its observed action contexts in the action-kernel RKHS; the
distance between two agents' embeddings (an MMD estimate computed from
running double sums) is turned into a similarity value through an
exponential.  Running sums are maintained incrementally so each new
observation costs O(t * partners) kernel evaluations instead of a full
O(t^2) recomputation.
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import KernelSpec, kernel_matrix, kernel_row


class EmbeddingState:
    """Running kernel double sums between agents' observed contexts.

    ``pairs`` restricts which cross sums are maintained incrementally (an
    agent only needs similarities to agents it can hear from); pairs outside
    the registered set are still computable on demand from the stored
    contexts.  With ``pairs=None`` every pair is maintained.
    """

    def __init__(self, n_agents: int, action_kernel: KernelSpec, dim: int,
                 pairs=None):
        self.n_agents = n_agents
        self.action_kernel = action_kernel
        self.dim = dim
        self._counts = np.zeros(n_agents, dtype=np.int64)
        self._self_sums = np.zeros(n_agents)
        if pairs is None:
            pairs = [
                (v, w) for v in range(n_agents) for w in range(v + 1, n_agents)
            ]
        self._cross = {self._key(v, w): 0.0 for v, w in pairs if v != w}
        self._partners = [[] for _ in range(n_agents)]
        for v, w in self._cross:
            self._partners[v].append(w)
            self._partners[w].append(v)
        cap = 32
        self._ctx = [np.empty((cap, dim)) for _ in range(n_agents)]

    @staticmethod
    def _key(v: int, w: int) -> tuple[int, int]:
        return (v, w) if v < w else (w, v)

    def count(self, v: int) -> int:
        return int(self._counts[v])

    def contexts(self, v: int) -> np.ndarray:
        return self._ctx[v][: self._counts[v]]

    def observe(self, agent: int, x):
        """Fold one observed context into all sums involving ``agent``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"context dimension {x.shape} != ({self.dim},)")
        t = int(self._counts[agent])
        buf = self._ctx[agent]
        if t == buf.shape[0]:
            grown = np.empty((2 * t, self.dim))
            grown[:t] = buf
            self._ctx[agent] = grown
            buf = grown
        if t > 0:
            row = kernel_row(self.action_kernel, buf, x, n=t)
            self._self_sums[agent] += 2.0 * float(np.sum(row))
        self._self_sums[agent] += _self_value(self.action_kernel, x)
        for partner in self._partners[agent]:
            tp = int(self._counts[partner])
            if tp > 0:
                row = kernel_row(self.action_kernel, self._ctx[partner], x, n=tp)
                self._cross[self._key(agent, partner)] += float(np.sum(row))
        buf[t] = x
        self._counts[agent] = t + 1

    def _cross_sum(self, v: int, w: int) -> float:
        key = self._key(v, w)
        if key in self._cross:
            return self._cross[key]
        # unregistered pair: direct double sum over stored contexts
        A, B = self.contexts(v), self.contexts(w)
        return float(np.sum(kernel_matrix(self.action_kernel, A, B)))

    def empirical_mmd(self, v: int, w: int) -> float:
        """Biased, 1/t^2-normalized MMD estimate between two agents."""
        tv, tw = self.count(v), self.count(w)
        if tv == 0 or tw == 0:
            raise ValueError(f"agent {v if tv == 0 else w} has no observations")
        if v == w:
            return 0.0
        sq = (
            self._self_sums[v] / tv**2
            + self._self_sums[w] / tw**2
            - 2.0 * self._cross_sum(v, w) / (tv * tw)
        )
        return math.sqrt(max(0.0, sq))

    def empirical_network_kernel(self, v: int, w: int, sigma_z: float,
                                 squared: bool = False) -> float:
        """exp(-MMD / (2 sigma_z^2)), unit diagonal; ``squared`` uses MMD^2."""
        if not sigma_z > 0:
            raise ValueError("sigma_z must be positive")
        if v == w:
            return 1.0
        mmd = self.empirical_mmd(v, w)
        exponent = mmd * mmd if squared else mmd
        return math.exp(-exponent / (2.0 * sigma_z**2))

    def pairwise_matrix(self, sigma_z: float, squared: bool = False) -> np.ndarray:
        """Full agent-similarity matrix (on-demand for unregistered pairs)."""
        K = np.eye(self.n_agents)
        for v in range(self.n_agents):
            for w in range(v + 1, self.n_agents):
                K[v, w] = K[w, v] = self.empirical_network_kernel(
                    v, w, sigma_z, squared
                )
        return K


def _self_value(spec: KernelSpec, x: np.ndarray) -> float:
    if spec.family == "linear":
        return float(x @ x)
    return 1.0


class EmpiricalNetworkKernel:
    """Agent-indexed kernel handle backed by an :class:`EmbeddingState`.

    Presents the ``value``/``row`` interface the composed kernel expects, so
    the estimated similarity drops in wherever an oracle network kernel is
    used.  Values reflect the estimate at call time; a per-round cache keeps
    row lookups O(1).
    """

    def __init__(self, state: EmbeddingState, sigma_z: float,
                 squared: bool = False):
        if not sigma_z > 0:
            raise ValueError("sigma_z must be positive")
        self.state = state
        self.sigma_z = sigma_z
        self.squared = squared
        self._rows: dict[int, np.ndarray] = {}

    def invalidate(self):
        """Drop cached values after the underlying sums change."""
        self._rows.clear()

    def _row_for(self, w: int) -> np.ndarray:
        if w < 0 or w >= self.state.n_agents:
            raise ValueError(f"agent id {w} outside the tracked population")
        row = self._rows.get(w)
        if row is None:
            row = np.empty(self.state.n_agents)
            for v in range(self.state.n_agents):
                if v == w:
                    row[v] = 1.0
                elif self.state.count(v) == 0 or self.state.count(w) == 0:
                    row[v] = 1.0  # no evidence yet: full similarity
                else:
                    row[v] = self.state.empirical_network_kernel(
                        v, w, self.sigma_z, self.squared
                    )
            self._rows[w] = row
        return row

    def value(self, v: int, w: int) -> float:
        if v < 0 or w < 0:
            raise ValueError("empirical network kernel needs agent ids")
        return float(self._row_for(w)[v])

    def row(self, agent_ids: np.ndarray, w: int) -> np.ndarray:
        return self._row_for(w)[np.asarray(agent_ids, dtype=np.int64)]
