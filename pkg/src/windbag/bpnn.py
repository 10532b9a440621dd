"""Three-layer sigmoid network trained by full-batch back-propagation."""

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._backend import get_kernels
from .preprocess import NormStats

FORMAT_NAME = "windbag-bpnn"
FORMAT_VERSION = 1
WIDTH_SWEEP = tuple(2 * m + 1 for m in range(2, 11))  # 5, 7, ..., 21


class TrainingDivergence(FloatingPointError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite error) at epoch {epoch}; "
                                    "reduce learning_rate")


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    hidden_dim: int = 0  # 0 -> 2 * input_dim + 1
    learning_rate: float = 20.0
    max_epochs: int = 20000
    target_error: float = 1e-4
    seed: int = 0
    weight_init_range: float = 0.5

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_dim == 0:
            object.__setattr__(self, "hidden_dim", 2 * self.input_dim + 1)
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 0 or self.target_error < 0 or self.weight_init_range < 0:
            raise ValueError("max_epochs, target_error and weight_init_range must be non-negative")


@dataclass(frozen=True, eq=False)
class NeuralNet:
    """Weights of one network. ``w`` is (hidden, input), ``v`` is (hidden,)."""

    w: np.ndarray
    b_hidden: np.ndarray
    v: np.ndarray
    b_out: float
    config: NetConfig
    train_curve: tuple = ()
    norm_x: NormStats = None
    norm_y: NormStats = None
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self):
        return self.w.shape[1]

    @property
    def hidden_dim(self):
        return self.w.shape[0]


def sigmoid(x):
    """Logistic function, overflow-free for any finite input."""
    x = np.asarray(x, dtype=float)
    pos = x >= 0
    ez = np.exp(np.where(pos, -x, x))
    out = np.where(pos, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return out if out.ndim else float(out)


def init_net(config):
    rng = np.random.default_rng(config.seed)
    a = config.weight_init_range
    h, m = config.hidden_dim, config.input_dim
    w = rng.uniform(-a, a, size=(h, m))
    b_hidden = rng.uniform(-a, a, size=h)
    v = rng.uniform(-a, a, size=h)
    b_out = float(rng.uniform(-a, a))
    return NeuralNet(w, b_hidden, v, b_out, config)


def _as_batch(net, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != net.input_dim:
        raise ValueError(f"input has {X.shape[1]} feature(s), network expects {net.input_dim}")
    return X, single


def forward(net, x):
    """Return ``(u, z)``: output(s) in (0, 1) and hidden activations."""
    X, single = _as_batch(net, x)
    z = sigmoid(X @ net.w.T + net.b_hidden)
    u = sigmoid(z @ net.v + net.b_out)
    if single:
        return float(u[0]), z[0]
    return u, z


def _check_batch(net, X, Y):
    X, _ = _as_batch(net, X)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if Y.shape[0] != X.shape[0]:
        raise ValueError("X and Y differ in sample count")
    return X, Y


def loss(net, X, Y):
    """Squared-error signal ``0.5 * sum((y - u)**2)`` over the batch."""
    X, Y = _check_batch(net, X, Y)
    u, _ = forward(net, X)
    r = Y - u
    return 0.5 * float(r @ r)


def gradients(net, X, Y):
    """Exact gradients of :func:`loss` w.r.t. ``(w, b_hidden, v, b_out)``."""
    X, Y = _check_batch(net, X, Y)
    u, z = forward(net, X)
    d_out = (u - Y) * u * (1.0 - u)
    d_hid = np.outer(d_out, net.v) * z * (1.0 - z)
    return d_hid.T @ X, d_hid.sum(axis=0), z.T @ d_out, float(d_out.sum())


def backprop_step(net, X, Y, learning_rate=None):
    """One full-batch gradient-descent update; returns ``(new_net, grad_norms)``.

    The step is ``learning_rate`` times the batch-mean gradient, so the rate
    does not depend on how many samples a training set holds.
    """
    lr = net.config.learning_rate if learning_rate is None else learning_rate
    X, Y = _check_batch(net, X, Y)
    g_w, g_bh, g_v, g_bo = gradients(net, X, Y)
    norms = {
        "w": float(np.linalg.norm(g_w)),
        "b_hidden": float(np.linalg.norm(g_bh)),
        "v": float(np.linalg.norm(g_v)),
        "b_out": abs(g_bo),
    }
    if not all(np.isfinite(list(norms.values()))):
        raise TrainingDivergence(len(net.train_curve), "non-finite gradient; reduce learning_rate")
    step = lr / X.shape[0]
    new = replace(
        net,
        w=net.w - step * g_w,
        b_hidden=net.b_hidden - step * g_bh,
        v=net.v - step * g_v,
        b_out=net.b_out - step * g_bo,
    )
    return new, norms


def train(config, X, Y, backend=None, init=None):
    """Train a fresh network from ``config`` on ``(X, Y)``.

    Runs full-batch gradient descent until the mean error
    ``loss / n_samples`` is at most ``target_error`` or ``max_epochs`` updates
    have been made. ``train_curve`` holds the mean error seen before each
    update. ``Y`` should already lie inside (0, 1).
    """
    net = init if init is not None else init_net(config)
    X = np.ascontiguousarray(X, dtype=float)
    Y = np.ascontiguousarray(np.asarray(Y, dtype=float).ravel())
    _check_batch(net, X, Y)
    if X.shape[1] != config.input_dim:
        raise ValueError("config.input_dim does not match X")

    w = np.array(net.w, dtype=float, order="C")
    bh = np.array(net.b_hidden, dtype=float)
    v = np.array(net.v, dtype=float)
    bo = np.array([net.b_out], dtype=float)
    curve = np.empty(max(config.max_epochs, 1))
    recorded, diverged = get_kernels(backend).train_full_batch(
        X, Y, w, bh, v, bo, float(config.learning_rate), int(config.max_epochs),
        float(config.target_error), curve,
    )
    if diverged >= 0:
        raise TrainingDivergence(diverged)
    return NeuralNet(w, bh, v, float(bo[0]), config, tuple(float(e) for e in curve[:recorded]))


def rmse_of(net, X, Y):
    u, _ = forward(net, np.atleast_2d(X))
    r = np.asarray(Y, dtype=float).ravel() - u
    return float(np.sqrt(np.mean(r * r)))


def select_hidden_width(config, train_set, validation_set, candidates=WIDTH_SWEEP, backend=None):
    """Sweep hidden widths, returning the config with the lowest validation RMSE.

    Ties go to the smaller width. Returns ``(config, scores)`` where scores
    maps width to validation RMSE.
    """
    Xv, Yv = validation_set
    if len(np.asarray(Yv).ravel()) == 0:
        raise ValueError("validation split is empty")
    candidates = list(candidates)
    if len(candidates) == 1:
        return replace(config, hidden_dim=candidates[0]), {}
    scores = {}
    for h in sorted(candidates):
        net = train(replace(config, hidden_dim=h), *train_set, backend=backend)
        scores[h] = rmse_of(net, Xv, Yv)
    best = min(scores, key=lambda h: (scores[h], h))
    return replace(config, hidden_dim=best), scores


# ------------------------------------------------------------- persistence


def net_to_dict(net):
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "input_dim": net.input_dim,
        "hidden_dim": net.hidden_dim,
        "config": asdict(net.config),
        "w": net.w.tolist(),
        "b_hidden": net.b_hidden.tolist(),
        "v": net.v.tolist(),
        "b_out": net.b_out,
        "train_curve": list(net.train_curve),
        "norm_x": net.norm_x.to_dict() if net.norm_x else None,
        "norm_y": net.norm_y.to_dict() if net.norm_y else None,
        "meta": net.meta,
    }


def net_from_dict(d):
    if d.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} model")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    cfg = NetConfig(**d["config"])
    w = np.array(d["w"], dtype=float).reshape(d["hidden_dim"], d["input_dim"])
    return NeuralNet(
        w, np.array(d["b_hidden"], dtype=float), np.array(d["v"], dtype=float), float(d["b_out"]),
        cfg, tuple(d["train_curve"]),
        NormStats.from_dict(d["norm_x"]) if d["norm_x"] else None,
        NormStats.from_dict(d["norm_y"]) if d["norm_y"] else None,
        d.get("meta", {}),
    )


def save_net(net, path):
    # json floats are repr-exact, so load -> save reproduces the file byte for byte
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(net_to_dict(net), fh, indent=1)
        fh.write("\n")


def load_net(path):
    with open(path, encoding="utf-8") as fh:
        return net_from_dict(json.load(fh))
