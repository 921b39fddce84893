"""Command-line experiment runner.

Configuration comes from an INI-style file of ``key = value`` entries
grouped in per-module sections (section names are organizational only; keys
are globally unique).  Every command-line flag overrides its config key.
"""

from __future__ import annotations

import argparse
import configparser
import sys

from .harness import ConfigError, ExperimentConfig, run_experiment

# config key -> ExperimentConfig field and parser
_KEYMAP = {
    "source": ("graph_source", str),
    "graph": ("graph_source", str),
    "v": ("V", int),
    "p": ("p", float),
    "edge_list": ("edge_list_path", str),
    "gamma": ("gamma", int),
    "t": ("T", int),
    "trials": ("trials", int),
    "policies": ("policies", lambda s: tuple(x.strip() for x in s.split(","))),
    "kernel_x": ("kernel_x", str),
    "kernel_z": ("kernel_z", str),
    "kz_mode": ("kz_mode", str),
    "sigma_z": ("sigma_z", float),
    "mmd_squared": ("mmd_squared", lambda s: s.lower() in ("1", "true", "yes")),
    "arms": ("arms", int),
    "dim": ("dim", int),
    "dim_z": ("dim_z", int),
    "lambda": ("lam", float),
    "eta": ("eta", float),
    "b": ("B", float),
    "r": ("R", float),
    "delta": ("delta", float),
    "ucb_mode": ("ucb_mode", str),
    "seed": ("seed", int),
    "z_model": ("z_model", str),
    "cluster_spread": ("cluster_spread", float),
    "anchors": ("anchors", int),
    "fixed_decisions": ("fixed_decisions",
                        lambda s: s.lower() in ("1", "true", "yes")),
    "representation": ("representation", str),
    "workers": ("workers", int),
}


def load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    overrides = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            norm = key.lower()
            if norm not in _KEYMAP:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            field, conv = _KEYMAP[norm]
            overrides[field] = conv(value)
    return overrides


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netkucb",
        description="Simulate cooperative kernel-UCB bandits on a network "
                    "and write per-round regret traces to CSV.",
    )
    ap.add_argument("--config", help="INI config file; flags override it")
    ap.add_argument("--graph", choices=["erdos-renyi", "edge-list"],
                    help="graph source")
    ap.add_argument("--V", type=int, help="number of agents")
    ap.add_argument("--p", type=float, help="Erdos-Renyi edge probability")
    ap.add_argument("--edge-list", help="path to a '#'-commented edge list")
    ap.add_argument("--gamma", type=int,
                    help="message TTL (default: ceil(diameter/2))")
    ap.add_argument("--T", type=int, help="rounds per trial")
    ap.add_argument("--trials", type=int, help="independent trials to average")
    ap.add_argument("--policies",
                    help="comma list: coop,eager,dist,independent,linucb,"
                         "naive,omniscient")
    ap.add_argument("--kernel-x",
                    help="action kernel: linear | rbf:<bw> | matern:<ls>:<nu>")
    ap.add_argument("--kz-mode", choices=["oracle", "empirical"],
                    help="network kernel: oracle values or online estimate")
    ap.add_argument("--sigma-z", type=float,
                    help="bandwidth of the estimated network kernel")
    ap.add_argument("--arms", type=int, help="decision set size per round")
    ap.add_argument("--dim", type=int, help="action context dimension")
    ap.add_argument("--lambda", dest="lam", type=float,
                    help="ridge regularizer")
    ap.add_argument("--eta", type=float, help="exploration scale")
    ap.add_argument("--B", type=float, help="reward-function norm bound")
    ap.add_argument("--R", type=float, help="noise scale")
    ap.add_argument("--seed", type=int, help="master seed")
    ap.add_argument("--out", default="regret.csv", help="regret CSV path")
    ap.add_argument("--metrics-out",
                    help="write structural/information-gain metrics JSON here")
    return ap


_FLAG_FIELDS = {
    "graph": "graph_source",
    "V": "V",
    "p": "p",
    "edge_list": "edge_list_path",
    "gamma": "gamma",
    "T": "T",
    "trials": "trials",
    "kernel_x": "kernel_x",
    "kz_mode": "kz_mode",
    "sigma_z": "sigma_z",
    "arms": "arms",
    "dim": "dim",
    "lam": "lam",
    "eta": "eta",
    "B": "B",
    "R": "R",
    "seed": "seed",
}


def config_from_args(args) -> ExperimentConfig:
    overrides = load_config_file(args.config) if args.config else {}
    for attr, field in _FLAG_FIELDS.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[field] = value
    if args.policies is not None:
        overrides["policies"] = tuple(
            x.strip() for x in args.policies.split(",") if x.strip()
        )
    return ExperimentConfig(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    agg, _ = run_experiment(cfg, out=args.out, metrics_out=args.metrics_out)
    final = {kind: tr.mean[-1] for kind, tr in agg.items()}
    for kind in sorted(final):
        print(f"{kind}: final mean per-agent regret {final[kind]:.6g}")
    print(f"wrote {args.out}" + (
        f" and {args.metrics_out}" if args.metrics_out else ""
    ))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
