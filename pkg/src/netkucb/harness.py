"""Experiment orchestration: paired trials, aggregation, CSV and metrics.

A trial realizes one environment (graph, reward function, decision sets,
noise) from derived random streams and runs every configured policy on that
identical realization, so regret differences are attributable to the
policies alone.  Aggregation across trials reports pointwise means and
population standard deviations of cumulative per-agent regret.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import environment as envmod
from . import graphs as graphmod
from .embeddings import EmbeddingState, EmpiricalNetworkKernel
from .environment import (
    TAG_ANCHORS,
    TAG_DECISIONS,
    TAG_GRAPH,
    TAG_NOISE,
    TAG_SELECT,
    TAG_ZMODEL,
    derived_rng,
)
from .kernels import (
    AugmentedContext,
    ComposedKernel,
    KernelSpec,
    build_gram,
    kernel_matrix,
    numerical_rank,
)
from .network import MessageSchedule
from .policies import DIST, LINUCB, OMNISCIENT, POLICY_KINDS, Agent
from .regression import UcbParams


class ConfigError(ValueError):
    pass


def parse_kernel(text: str) -> KernelSpec:
    """Kernel syntax: 'linear', 'rbf:<bandwidth>', 'matern:<lengthscale>:<nu>'."""
    parts = text.strip().split(":")
    family = parts[0]
    if family == "linear":
        return KernelSpec("linear")
    if family == "rbf":
        bw = float(parts[1]) if len(parts) > 1 else 1.0
        return KernelSpec("rbf", bandwidth=bw)
    if family == "matern":
        ls = float(parts[1]) if len(parts) > 1 else 1.0
        nu = float(parts[2]) if len(parts) > 2 else 1.5
        return KernelSpec("matern", lengthscale=ls, nu=nu)
    raise ConfigError(f"unknown kernel {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    graph_source: str = "erdos-renyi"  # or "edge-list"
    V: int = 20
    p: float = 0.3
    edge_list_path: str | None = None
    gamma: int | None = None  # default: ceil(diameter / 2)
    T: int = 500
    trials: int = 20
    policies: tuple = ("coop", "independent")
    kernel_x: str = "linear"
    kernel_z: str = "linear"
    kz_mode: str = "oracle"  # or "empirical"
    sigma_z: float = 1.0
    mmd_squared: bool = False
    arms: int = 8
    dim: int = 10
    dim_z: int = 10
    lam: float = 1.0
    eta: float = 1.0
    B: float = 1.0
    R: float = 0.1
    delta: float = 0.1
    ucb_mode: str = "tunable"
    seed: int = 0
    z_model: str = "identical"  # identical | clustered | random-unit
    cluster_spread: float = 0.5
    anchors: int = 50
    fixed_decisions: bool = False
    representation: str = "auto"
    workers: int = 1

    def __post_init__(self):
        if self.T < 1 or self.trials < 1:
            raise ConfigError("T and trials must be >= 1")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.gamma is not None and self.gamma < 1:
            raise ConfigError("gamma must be >= 1")
        if self.kz_mode not in ("oracle", "empirical"):
            raise ConfigError(f"unknown kz mode {self.kz_mode!r}")
        if self.z_model not in ("identical", "clustered", "random-unit"):
            raise ConfigError(f"unknown network context model {self.z_model!r}")
        for kind in self.policies:
            if kind not in POLICY_KINDS:
                raise ConfigError(f"unknown policy {kind!r}")
        if DIST in self.policies and not self.fixed_decisions:
            raise ConfigError(
                "dist mimics delayed actions and requires a decision set "
                "fixed across agents and rounds (set fixed_decisions)"
            )
        parse_kernel(self.kernel_x)
        parse_kernel(self.kernel_z)


class TrialEnv:
    """One trial's frozen environment realization, shared by all policies."""

    def __init__(self, cfg: ExperimentConfig, trial: int):
        self.cfg = cfg
        self.trial = trial
        self.graph = self._build_graph(cfg, trial)
        self.distances = graphmod.all_pairs_distances(self.graph)
        diam = int(self.distances.max())
        self.gamma = cfg.gamma if cfg.gamma is not None else max(1, math.ceil(diam / 2))
        self.gpow = graphmod.graph_power(self.graph, self.gamma)
        self.cover = graphmod.greedy_clique_cover(self.gpow)
        self.z, self.clusters = envmod.gen_network_contexts(
            cfg.z_model, self.graph.V, cfg.dim_z, self.graph, self.gamma,
            derived_rng(cfg.seed, trial, TAG_ZMODEL), cfg.cluster_spread,
        )
        self.oracle_ck = ComposedKernel(
            parse_kernel(cfg.kernel_z), parse_kernel(cfg.kernel_x)
        )
        self.gt = envmod.make_ground_truth(
            self.oracle_ck, cfg.anchors, cfg.B,
            derived_rng(cfg.seed, trial, TAG_ANCHORS),
            z_pool=np.asarray(self.z), dim_x=cfg.dim,
        )
        V, T, k, d = self.graph.V, cfg.T, cfg.arms, cfg.dim
        if cfg.fixed_decisions:
            shared = envmod.sample_unit_ball(
                derived_rng(cfg.seed, trial, TAG_DECISIONS), k, d
            )
            self._decisions = np.tile(shared, (T, V, 1, 1))
        else:
            ds = np.empty((T, V, k, d))
            for t in range(T):
                for v in range(V):
                    ds[t, v] = envmod.sample_unit_ball(
                        derived_rng(cfg.seed, trial, TAG_DECISIONS, v, t + 1),
                        k, d,
                    )
            self._decisions = ds
        # true values of every offered arm, and per-(agent, round) noise
        self._fvals = np.empty((T, V, k))
        for v in range(V):
            flat = self._decisions[:, v].reshape(T * k, d)
            self._fvals[:, v] = self.gt.values(self.z[v], flat).reshape(T, k)
        self._best = self._fvals.max(axis=2)
        noise = np.empty((T, V))
        for t in range(T):
            for v in range(V):
                noise[t, v] = derived_rng(
                    cfg.seed, trial, TAG_NOISE, v, t + 1
                ).standard_normal()
        self._noise = cfg.R * noise

    @staticmethod
    def _build_graph(cfg: ExperimentConfig, trial: int):
        if cfg.graph_source == "erdos-renyi":
            seed = int(derived_rng(cfg.seed, trial, TAG_GRAPH).integers(2**62))
            return graphmod.gen_erdos_renyi(cfg.V, cfg.p, seed)
        if cfg.graph_source == "edge-list":
            if not cfg.edge_list_path:
                raise ConfigError("edge-list graph source needs a path")
            with open(cfg.edge_list_path) as fh:
                text = fh.read()
            return graphmod.load_edge_list(text, subsample_to=cfg.V)
        raise ConfigError(f"unknown graph source {cfg.graph_source!r}")

    # round arguments are 1-indexed to match the protocol's clock
    def decision_set(self, v: int, t: int) -> np.ndarray:
        return self._decisions[t - 1, v]

    def true_values(self, v: int, t: int) -> np.ndarray:
        return self._fvals[t - 1, v]

    def pull(self, v: int, t: int, idx: int) -> float:
        return float(self._fvals[t - 1, v, idx] + self._noise[t - 1, v])

    def regret(self, v: int, t: int, idx: int) -> float:
        return float(self._best[t - 1, v] - self._fvals[t - 1, v, idx])

    def select_rng(self, v: int, t: int) -> np.random.Generator:
        return derived_rng(self.cfg.seed, self.trial, TAG_SELECT, v, t)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.graph.V).tobytes())
        h.update(repr(sorted(self.graph.edges)).encode())
        for z in self.z:
            h.update(np.ascontiguousarray(z).tobytes())
        h.update(np.ascontiguousarray(self.gt.anchors_z).tobytes())
        h.update(np.ascontiguousarray(self.gt.anchors_x).tobytes())
        h.update(np.ascontiguousarray(self.gt.alpha).tobytes())
        h.update(np.ascontiguousarray(self._decisions).tobytes())
        h.update(np.ascontiguousarray(self._noise).tobytes())
        return h.hexdigest()


def _central_assignment(env: TrialEnv):
    weights = {
        v: len(env.gpow.neighbors(v)) + 1 for v in range(env.graph.V)
    }
    centrals = graphmod.greedy_max_weight_independent_set(env.gpow, weights)
    degrees = {v: env.gpow.degree(v) for v in range(env.graph.V)}
    return graphmod.assign_peripherals(
        env.gpow, centrals, degrees, distances=env.distances
    )


def _embedding_pairs(env: TrialEnv, kind: str):
    """Pairs whose similarity the estimator maintains, per policy locality."""
    V = env.graph.V
    if kind == "coop":
        return [
            (v, w)
            for v in range(V) for w in range(v + 1, V)
            if env.cover.clique_of(v) == env.cover.clique_of(w)
        ]
    return [
        (v, w)
        for v in range(V) for w in range(v + 1, V)
        if 1 <= env.distances[v, w] <= env.gamma
    ]


def run_policy(cfg: ExperimentConfig, env: TrialEnv, kind: str):
    """Run one policy on a frozen trial environment.

    Returns (cumulative per-agent regret trace, artifacts dict).
    """
    V, T = env.graph.V, cfg.T
    embedding = None
    handle = None
    if kind in (LINUCB, OMNISCIENT):
        agent_ck = env.oracle_ck
    elif cfg.kz_mode == "empirical" and kind not in (LINUCB, OMNISCIENT):
        embedding = EmbeddingState(
            V, parse_kernel(cfg.kernel_x), cfg.dim,
            pairs=_embedding_pairs(env, kind),
        )
        handle = EmpiricalNetworkKernel(embedding, cfg.sigma_z, cfg.mmd_squared)
        agent_ck = ComposedKernel(handle, parse_kernel(cfg.kernel_x))
    else:
        agent_ck = env.oracle_ck
    params = UcbParams(
        eta=cfg.eta, lam=cfg.lam, mode=cfg.ucb_mode, B=cfg.B, R=cfg.R,
        delta=cfg.delta, V=V,
    )
    assignment = _central_assignment(env) if kind == DIST else None
    agents = []
    for v in range(V):
        role = cent = None
        delay = 0
        if kind == DIST:
            if v in assignment.centrals:
                role = "central"
            else:
                role = "peripheral"
                cent = assignment.cent[v]
                delay = assignment.delay[v]
        agents.append(Agent(
            agent_id=v, kind=kind, z=env.z[v], ck=agent_ck, params=params,
            lam=cfg.lam, representation=cfg.representation,
            clique_id=env.cover.clique_of(v), cover=env.cover, role=role,
            cent=cent, cent_delay=delay, action_dim=cfg.dim,
        ))
    sim = MessageSchedule(env.distances, env.gamma)
    group_regret = np.zeros(T)
    for t in range(1, T + 1):
        for agent in agents:
            idx, _ = agent.step(t, env, sim, env.select_rng(agent.id, t))
            group_regret[t - 1] += env.regret(agent.id, t, idx)
        if embedding is not None:
            for agent in agents:
                x = env.decision_set(agent.id, t)[agent.action_log[-1]]
                embedding.observe(agent.id, x)
            handle.invalidate()
    trace = np.cumsum(group_regret) / V
    artifacts = {
        "action_logs": [list(a.action_log) for a in agents],
        "sigma2_logs": [list(a.sigma2_log) for a in agents],
        "state_sizes": [a.state_size() for a in agents],
        "psd_violations": sum(
            a.state.psd_violations for a in agents if a.state is not None
        ),
        "assignment": assignment,
        "embedding": embedding,
        "agents": agents,
    }
    return trace, artifacts


def run_trial(cfg: ExperimentConfig, trial: int, collect: bool = False):
    """All policies on one shared environment realization."""
    env = TrialEnv(cfg, trial)
    traces = {}
    artifacts = {"digest": env.digest(), "env": env if collect else None,
                 "policies": {}}
    for kind in cfg.policies:
        trace, art = run_policy(cfg, env, kind)
        traces[kind] = trace
        if collect:
            artifacts["policies"][kind] = art
    return traces, artifacts


@dataclass
class RegretTrace:
    """Per-round mean/std across trials of cumulative per-agent regret."""

    mean: np.ndarray
    std: np.ndarray
    raw: np.ndarray  # (trials, T)


def aggregate(per_trial_traces: list) -> dict:
    """Pointwise mean and population std across trials, per policy."""
    if not per_trial_traces:
        raise ValueError("no traces to aggregate")
    policies = list(per_trial_traces[0].keys())
    lengths = {len(tr[k]) for tr in per_trial_traces for k in tr}
    if len(lengths) != 1:
        raise ValueError("mismatched trace lengths")
    out = {}
    for kind in policies:
        raw = np.vstack([tr[kind] for tr in per_trial_traces])
        out[kind] = RegretTrace(
            mean=raw.mean(axis=0), std=raw.std(axis=0), raw=raw
        )
    return out


def write_csv(traces: dict, path: str):
    """Deterministic CSV: round-major rows, policy-name-minor, 12 sig digits."""
    T = len(next(iter(traces.values())).mean)
    lines = ["round,policy,mean_per_agent_regret,std_per_agent_regret"]
    for t in range(T):
        for kind in sorted(traces):
            tr = traces[kind]
            lines.append(
                f"{t + 1},{kind},{tr.mean[t]:.12g},{tr.std[t]:.12g}"
            )
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write regret CSV to {path!r}: {exc}") from exc


def _run_trial_worker(args):
    cfg, trial = args
    return run_trial(cfg, trial, collect=False)[0]


def run_experiment(cfg: ExperimentConfig, out: str | None = None,
                   metrics_out: str | None = None):
    """Run all trials, aggregate, and optionally write CSV / metrics JSON."""
    per_trial = []
    first_artifacts = None
    if cfg.workers > 1 and cfg.trials > 1:
        traces0, first_artifacts = run_trial(cfg, 0, collect=bool(metrics_out))
        per_trial.append(traces0)
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rest = pool.map(
                _run_trial_worker, [(cfg, t) for t in range(1, cfg.trials)]
            )
            per_trial.extend(rest)
    else:
        for trial in range(cfg.trials):
            collect = trial == 0 and bool(metrics_out)
            traces, artifacts = run_trial(cfg, trial, collect=collect)
            per_trial.append(traces)
            if collect:
                first_artifacts = artifacts
    agg = aggregate(per_trial)
    if out:
        write_csv(agg, out)
    report = None
    if metrics_out:
        report = metrics_report(cfg, first_artifacts)
        with open(metrics_out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return agg, report


def clique_gram_logdet(env: TrialEnv, clique, action_log, kernel=None) -> float:
    """log det((1/lam) K_C + I) over every pull of the clique's agents."""
    cfg = env.cfg
    pts = []
    for v in clique:
        for t in range(1, cfg.T + 1):
            x = env.decision_set(v, t)[action_log[v][t - 1]]
            pts.append(AugmentedContext(z=env.z[v], x=x, agent=v))
    G = build_gram(kernel or env.oracle_ck, pts)
    sign, logdet = np.linalg.slogdet(G / cfg.lam + np.eye(len(pts)))
    return float(logdet)


def metrics_report(cfg: ExperimentConfig, artifacts: dict) -> dict:
    """Structural and information-gain diagnostics for one collected trial."""
    env: TrialEnv = artifacts["env"]
    if env is None:
        raise ValueError("metrics need a trial run with collect=True")
    assignment = _central_assignment(env)
    report = {
        "gamma": env.gamma,
        "clique_cover_size": len(env.cover.parts),
        "independent_set_size": len(assignment.centrals),
        "env_digest": artifacts["digest"],
    }
    # heterogeneity: rank of the agent network-kernel matrix
    Z = np.asarray(env.z)
    if cfg.kz_mode == "oracle":
        Kz = kernel_matrix(parse_kernel(cfg.kernel_z), Z, Z)
    else:
        coop_art = artifacts["policies"].get("coop") or next(
            iter(artifacts["policies"].values())
        )
        emb = coop_art["embedding"]
        Kz = emb.pairwise_matrix(cfg.sigma_z, cfg.mmd_squared) if emb is not None \
            else kernel_matrix(parse_kernel(cfg.kernel_z), Z, Z)
    report["heterogeneity"] = numerical_rank(Kz)
    report["network_kernel_min_eigenvalue"] = float(
        np.linalg.eigvalsh(Kz).min()
    )
    report["psd_violations"] = {
        kind: art.get("psd_violations", 0)
        for kind, art in artifacts["policies"].items()
    }
    if "coop" in artifacts["policies"]:
        art = artifacts["policies"]["coop"]
        gains = []
        checks = []
        for clique in env.cover.parts:
            logdet = clique_gram_logdet(env, clique, art["action_logs"])
            gains.append(logdet)
            measured = 0.0
            for v in clique:
                sig = art["sigma2_logs"][v]
                measured += sum(sig[env.gamma - 1:])
            bound = (
                env.gamma * len(clique) * cfg.B
                + max(1.0, 1.0 / cfg.lam) * logdet
            )
            checks.append({
                "clique": list(clique),
                "measured_sum_sigma2": measured,
                "bound": bound,
                "holds": bool(measured <= bound * (1.0 + 1e-6)),
            })
        report["information_gain_per_clique"] = gains
        report["information_gain"] = max(gains)
        report["variance_bound_checks"] = checks
    return report
