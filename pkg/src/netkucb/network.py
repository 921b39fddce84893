"""Deterministic simulation of round-based message passing with TTL.

A message created at round t by agent v reaches every agent v' with
1 <= d(v, v') <= gamma exactly once, at round t + d(v, v').  Hop-by-hop
forwarding state is not modeled; the distance cutoff is observationally
equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import AugmentedContext


@dataclass(frozen=True, eq=False)
class Message:
    round: int
    origin: int
    payload: AugmentedContext
    reward: float


class MessageSchedule:
    """Delay-exact delivery queue over a fixed distance matrix."""

    def __init__(self, distances: np.ndarray, gamma: int):
        if gamma < 1:
            raise ValueError("gamma must be >= 1")
        self.distances = np.asarray(distances)
        self.gamma = gamma
        self._pending: dict[tuple[int, int], list[Message]] = {}

    def broadcast(self, m: Message):
        """Schedule m for every destination within the TTL radius."""
        drow = self.distances[m.origin]
        for dest in range(len(drow)):
            d = int(drow[dest])
            if 1 <= d <= self.gamma:
                self._pending.setdefault((m.round + d, dest), []).append(m)

    def deliver(self, round: int, agent: int) -> list[Message]:
        """All messages due at (round, agent), each exactly once.

        Returned in (created round, origin id) order so replays are
        reproducible regardless of broadcast interleaving.
        """
        msgs = self._pending.pop((round, agent), [])
        msgs.sort(key=lambda m: (m.round, m.origin))
        return msgs

    def pending_count(self) -> int:
        return sum(len(v) for v in self._pending.values())
