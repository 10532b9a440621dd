"""Bootstrap-aggregated ensembles of BP networks."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import bpnn
from .bpnn import NetConfig, TrainingDivergence

MANIFEST_FORMAT = "windbag-ensemble"
MANIFEST_VERSION = 1


def derive_seed(master_seed, *path):
    """Fixed 63-bit seed for child ``path`` of ``master_seed``.

    Child ``(i,)`` depends only on ``(master_seed, i)``, so members can be
    trained in any order or in parallel.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class BaggingConfig:
    ensemble_size: int = 10
    bootstrap_fraction: float = 1.0
    base_config: NetConfig = None
    master_seed: int = 0

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if not 0 < self.bootstrap_fraction <= 1:
            raise ValueError("bootstrap_fraction must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class BaggedEnsemble:
    members: tuple
    member_seeds: tuple
    config: BaggingConfig

    def __post_init__(self):
        if len(self.members) != len(self.member_seeds):
            raise ValueError("member and seed counts differ")
        if len({m.input_dim for m in self.members}) > 1:
            raise ValueError("ensemble members disagree on input dimension")

    @property
    def input_dim(self):
        return self.members[0].input_dim


def bootstrap_sample(X, Y, n, seed):
    """Draw ``n`` rows uniformly with replacement; returns ``(X', Y', indices)``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("cannot bootstrap an empty data set")
    idx = np.random.default_rng(seed).integers(0, X.shape[0], size=n)
    return X[idx], Y[idx], idx


def member_plan(config, n_rows, i):
    """Seed, bootstrap size and network config of member ``i``."""
    seed = derive_seed(config.master_seed, i)
    n = max(1, int(round(config.bootstrap_fraction * n_rows)))
    net_cfg = replace(config.base_config, seed=derive_seed(seed, 1))
    return seed, n, net_cfg


def train_member(config, X, Y, i, backend=None):
    seed, n, net_cfg = member_plan(config, X.shape[0], i)
    Xb, Yb, _ = bootstrap_sample(X, Y, n, derive_seed(seed, 0))
    try:
        return bpnn.train(net_cfg, Xb, Yb, backend=backend)
    except TrainingDivergence as exc:
        raise TrainingDivergence(exc.epoch, f"ensemble member {i}: {exc}") from exc


def train_ensemble(config, X, Y, workers=1, backend=None, order=None):
    """Train ``ensemble_size`` members on bootstrap resamples of ``(X, Y)``.

    ``order`` permutes the sequence members are trained in (default
    ascending); the result is identical for any order or worker count.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    K = config.ensemble_size
    order = list(range(K)) if order is None else list(order)
    if sorted(order) != list(range(K)):
        raise ValueError("order must be a permutation of member indices")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nets = dict(zip(order, pool.map(lambda i: train_member(config, X, Y, i, backend), order)))
    else:
        nets = {i: train_member(config, X, Y, i, backend) for i in order}
    seeds = tuple(derive_seed(config.master_seed, i) for i in range(K))
    return BaggedEnsemble(tuple(nets[i] for i in range(K)), seeds, config)


def predict(ensemble, x):
    """Unweighted mean of member outputs, summed in ascending member order."""
    total = None
    for net in ensemble.members:
        u, _ = bpnn.forward(net, x)
        total = u if total is None else total + u
    return total / len(ensemble.members)


# ------------------------------------------------------------- persistence


def save_ensemble(ensemble, directory, extra=None):
    """Write ``manifest.json`` plus one bpnn model file per member."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, net in enumerate(ensemble.members):
        name = f"member_{i:03d}.json"
        bpnn.save_net(net, directory / name)
        files.append(name)
    cfg = ensemble.config
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "member_count": len(ensemble.members),
        "input_dim": ensemble.input_dim,
        "member_seeds": list(ensemble.member_seeds),
        "config": {
            "ensemble_size": cfg.ensemble_size,
            "bootstrap_fraction": cfg.bootstrap_fraction,
            "master_seed": cfg.master_seed,
            "base_config": asdict(cfg.base_config),
        },
        "members": files,
    }
    if extra:
        manifest.update(extra)
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return directory


def load_ensemble(directory):
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"{directory}: not a version-{MANIFEST_VERSION} {MANIFEST_FORMAT} manifest")
    members = tuple(bpnn.load_net(directory / name) for name in manifest["members"])
    if len(members) != manifest["member_count"]:
        raise ValueError(f"{directory}: manifest lists {manifest['member_count']} members, found {len(members)}")
    if any(m.input_dim != manifest["input_dim"] for m in members):
        raise ValueError(f"{directory}: member input dimension does not match manifest")
    c = manifest["config"]
    cfg = BaggingConfig(c["ensemble_size"], c["bootstrap_fraction"], NetConfig(**c["base_config"]), c["master_seed"])
    return BaggedEnsemble(members, tuple(manifest["member_seeds"]), cfg), manifest
