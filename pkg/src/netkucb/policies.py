"""Decision policies: cooperative kernel-UCB and its variants plus baselines.

One Agent owns one regression state within one trial.  Within a round every
agent selects, pulls, broadcasts, then folds in its own observation followed
by whatever delivered messages its policy accepts, so round-t messages only
influence decisions from round t+1 on.
"""

from __future__ import annotations

import numpy as np

from .kernels import AugmentedContext, ComposedKernel, eval_composed
from .network import Message, MessageSchedule
from .regression import UcbParams, init_state

COOP = "coop"
EAGER = "eager"
DIST = "dist"
INDEPENDENT = "independent"
LINUCB = "linucb"
NAIVE = "naive"
OMNISCIENT = "omniscient"

POLICY_KINDS = (COOP, EAGER, DIST, INDEPENDENT, LINUCB, NAIVE, OMNISCIENT)


class LinUcbState:
    """Plain ridge UCB over raw action contexts (baseline cross-check)."""

    def __init__(self, dim: int, lam: float, alpha: float):
        self.lam = lam
        self.alpha = alpha
        self.count = 0
        self._Ainv = np.eye(dim) / lam
        self._b = np.zeros(dim)

    def update(self, x: np.ndarray, y: float):
        u = self._Ainv @ x
        self._Ainv -= np.outer(u, u) / (1.0 + float(x @ u))
        self._b += y * x
        self.count += 1

    def scores(self, arms: np.ndarray) -> np.ndarray:
        U = arms @ self._Ainv
        means = U @ self._b
        widths = np.sqrt(np.maximum(np.sum(U * arms, axis=1), 0.0))
        return means + self.alpha * widths


class Agent:
    """One agent's policy state within a trial."""

    def __init__(self, agent_id: int, kind: str, z: np.ndarray,
                 ck: ComposedKernel, params: UcbParams, lam: float,
                 representation: str = "auto", clique_id: int | None = None,
                 cover=None, role: str | None = None, cent: int | None = None,
                 cent_delay: int = 0, linucb_alpha: float | None = None,
                 action_dim: int | None = None):
        if kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {kind!r}")
        self.id = agent_id
        self.kind = kind
        self.z = np.asarray(z, dtype=float)
        self.ck = ck
        self.params = params
        self.lam = lam
        self.representation = representation
        self.clique_id = clique_id
        self.cover = cover
        self.role = role  # dist only: "central" | "peripheral"
        self.cent = cent
        self.cent_delay = cent_delay
        self.state = None
        self.linucb = None
        if kind == LINUCB:
            if action_dim is None:
                raise ValueError("linucb needs the action dimension")
            alpha = params.eta if linucb_alpha is None else linucb_alpha
            self.linucb = LinUcbState(action_dim, lam, alpha)
        self._stored_central_x: np.ndarray | None = None
        self.action_log: list[int] = []
        self.sigma2_log: list[float] = []

    # -- selection ---------------------------------------------------------

    def _self_sigma2(self, x: np.ndarray) -> float:
        """Prior variance K(x~, x~) used before any observation exists."""
        p = AugmentedContext(z=self.z, x=x, agent=self.id)
        return eval_composed(self.ck, p, p)

    def select_action(self, decision_set: np.ndarray, round: int,
                      rng: np.random.Generator) -> tuple[int, float]:
        """Chosen index and the variance proxy of the choice at decision time."""
        decision_set = np.asarray(decision_set, dtype=float)
        if decision_set.ndim != 2 or len(decision_set) == 0:
            raise ValueError("decision set must be a nonempty (k, d) array")
        if self.kind == LINUCB:
            if self.linucb.count == 0:
                idx = int(rng.integers(len(decision_set)))
            else:
                idx = int(np.argmax(self.linucb.scores(decision_set)))
            return idx, self._self_sigma2(decision_set[idx])
        if self.state is None or self.state.count == 0 or round == 1:
            idx = int(rng.integers(len(decision_set)))
            return idx, self._self_sigma2(decision_set[idx])
        means, variances = self.state.batch_mean_variance(
            self.z, decision_set, self.id
        )
        scores = means + self.state.exploration_multiplier(self.params) * np.sqrt(variances)
        idx = int(np.argmax(scores))
        return idx, float(variances[idx])

    # -- message handling --------------------------------------------------

    def accept_messages(self, msgs: list[Message]) -> list[Message]:
        """Filter delivered messages per the policy's cooperation rule."""
        if self.kind == COOP:
            return [
                m for m in msgs
                if self.cover.clique_of(m.origin) == self.clique_id
            ]
        if self.kind in (EAGER, NAIVE):
            return list(msgs)
        if self.kind == DIST and self.role == "central":
            return list(msgs)  # deliveries are exactly the gamma-neighborhood
        return []

    def _incorporate(self, point: AugmentedContext, y: float):
        if self.kind == NAIVE and point.agent != self.id:
            point = AugmentedContext(z=self.z, x=point.x, agent=self.id)
        if self.state is None:
            self.state = init_state(point, y, self.lam, self.ck,
                                    self.representation)
        else:
            self.state.incorporate(point, y)

    # -- one full round ----------------------------------------------------

    def step(self, t: int, env, sim: MessageSchedule,
             select_rng: np.random.Generator) -> tuple[int, float]:
        """Select, pull, broadcast, receive, and update for round t."""
        decision_set = env.decision_set(self.id, t)

        if self.kind == DIST and self.role == "peripheral":
            return self._step_peripheral(t, decision_set, env, sim, select_rng)

        if self.kind == OMNISCIENT:
            idx = int(np.argmax(env.true_values(self.id, t)))
            sigma2 = 0.0
        else:
            idx, sigma2 = self.select_action(decision_set, t, select_rng)
        x = decision_set[idx]
        point = AugmentedContext(z=self.z, x=x, agent=self.id)
        y = env.pull(self.id, t, idx)
        self.action_log.append(idx)
        self.sigma2_log.append(sigma2)

        if self.kind != OMNISCIENT:
            sim.broadcast(Message(round=t, origin=self.id, payload=point,
                                  reward=y))
        delivered = sim.deliver(t, self.id)
        if self.kind == LINUCB:
            self.linucb.update(x, y)
        elif self.kind != OMNISCIENT:
            self._incorporate(point, y)
            for m in self.accept_messages(delivered):
                self._incorporate(m.payload, m.reward)
        return idx, y

    def _step_peripheral(self, t, decision_set, env, sim, select_rng):
        """Dist peripheral: warm-up independently, then mimic with delay."""
        for m in sim.deliver(t, self.id):
            if m.origin == self.cent:
                self._stored_central_x = m.payload.x
        if t <= self.cent_delay or self._stored_central_x is None:
            idx, sigma2 = self.select_action(decision_set, t, select_rng)
            mimicking = False
        else:
            matches = np.nonzero(
                np.all(decision_set == self._stored_central_x, axis=1)
            )[0]
            if len(matches) == 0:
                raise ValueError(
                    "stored central action not found in the decision set; "
                    "dist needs a fixed decision set"
                )
            idx = int(matches[0])
            sigma2 = 0.0  # mimicked pulls are not UCB-scored
            mimicking = True
        x = decision_set[idx]
        point = AugmentedContext(z=self.z, x=x, agent=self.id)
        y = env.pull(self.id, t, idx)
        self.action_log.append(idx)
        self.sigma2_log.append(sigma2)
        sim.broadcast(Message(round=t, origin=self.id, payload=point, reward=y))
        if not mimicking:
            self._incorporate(point, y)
        return idx, y

    def state_size(self) -> int:
        if self.kind == LINUCB:
            return self.linucb.count
        return 0 if self.state is None else self.state.count
