"""Record cleaning, RReliefF feature weighting, feature selection and min-max scaling."""

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import get_kernels
from .dataset import SampleRecord

logger = logging.getLogger(__name__)

BLADE = "blade_angle"


class CleaningError(ValueError):
    pass


class FeatureSelectionError(ValueError):
    pass


# ---------------------------------------------------------------- cleaning


@dataclass(frozen=True)
class CleanReport:
    removed_indices: tuple = ()
    filled_indices: tuple = ()
    rules_fired: dict = field(default_factory=dict)

    @property
    def empty(self):
        return not self.removed_indices and not self.filled_indices

    def to_dict(self):
        return {
            "removed_indices": list(self.removed_indices),
            "filled_indices": list(self.filled_indices),
            "rules_fired": dict(sorted(self.rules_fired.items())),
        }


def _violations(rec):
    rules = []
    if any(not math.isfinite(v) for v in (rec.wind_speed, rec.blade_angle, rec.ambient_temp, rec.power)):
        rules.append("missing_value")
    if rec.wind_speed < 0:
        rules.append("negative_wind_speed")
    if rec.power < 0:
        rules.append("negative_power")
    return rules


def clean(records):
    """Remove records with negative wind speed or power and refill them.

    Records with non-finite required channels (e.g. grid placeholders) are
    treated the same way. Each vacancy gets the mean of the nearest valid
    record before and after it; at either end of the sequence the single
    available neighbour is copied. The output has the input's length.
    """
    if not records:
        raise CleaningError("nothing to clean: empty record list")
    rules = {}
    bad = []
    for i, rec in enumerate(records):
        fired = _violations(rec)
        for name in fired:
            rules[name] = rules.get(name, 0) + 1
        if fired:
            bad.append(i)
    if not bad:
        return list(records), CleanReport()
    if len(bad) == len(records):
        raise CleaningError("every record is invalid; no valid neighbour to fill from")

    valid = np.ones(len(records), dtype=bool)
    valid[bad] = False
    valid_idx = np.flatnonzero(valid)
    out = list(records)
    for i in bad:
        pos = np.searchsorted(valid_idx, i)
        before = records[valid_idx[pos - 1]] if pos > 0 else None
        after = records[valid_idx[pos]] if pos < len(valid_idx) else None
        out[i] = _fill(records[i].timestamp, before, after)
    report = CleanReport(tuple(bad), tuple(bad), rules)
    logger.info("clean: refilled %d of %d records %s", len(bad), len(records), rules)
    return out, report


def _fill(timestamp, before, after):
    if before is None or after is None:
        src = before or after
        return replace(src, timestamp=timestamp)
    a, b = math.radians(before.blade_angle), math.radians(after.blade_angle)
    angle = math.degrees(math.atan2(math.sin(a) + math.sin(b), math.cos(a) + math.cos(b))) % 360.0
    extras = tuple(
        (name, (va + vb) / 2.0)
        for (name, va), (_, vb) in zip(before.extra_features, after.extra_features)
    )
    return SampleRecord(
        timestamp,
        (before.wind_speed + after.wind_speed) / 2.0,
        angle,
        (before.ambient_temp + after.ambient_temp) / 2.0,
        (before.power + after.power) / 2.0,
        extras,
    )


# ----------------------------------------------------------------- RReliefF


@dataclass(frozen=True)
class FeatureWeights:
    weights: tuple  # ((name, weight), ...) in candidate order
    threshold: float = 0.01
    degenerate: bool = False

    def as_dict(self):
        return dict(self.weights)

    @property
    def selected(self):
        return [name for name, w in self.weights if w > self.threshold]

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "degenerate": self.degenerate,
            "weights": [[name, w] for name, w in self.weights],
            "selected": self.selected,
        }


def rank_weights(k, sigma):
    ranks = np.arange(1, k + 1, dtype=float)
    return np.exp(-((ranks / sigma) ** 2))


def relief_weights(samples, target, m=None, k=10, seed=0, sigma=20.0,
                   feature_names=None, threshold=0.01, backend=None):
    """RReliefF weights of each column of ``samples`` for a continuous target.

    ``m`` anchors are drawn without replacement with ``seed`` (all samples,
    in order, when ``m`` is None or at least the sample count). Each anchor
    contributes its ``k`` nearest neighbours under Manhattan distance on
    range-scaled features, weighted by ``exp(-(rank/sigma)**2)`` normalised
    over the neighbourhood.
    """
    X = np.asarray(samples, dtype=float)
    y = np.asarray(target, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("relief_weights needs a 2-D sample matrix with at least 2 rows")
    if y.shape[0] != X.shape[0]:
        raise ValueError("target length does not match sample count")
    n, nf = X.shape
    names = list(feature_names) if feature_names is not None else [f"feature_{i}" for i in range(nf)]
    if len(names) != nf:
        raise ValueError("feature_names length does not match column count")

    y_span = y.max() - y.min()
    if y_span == 0:
        logger.warning("relief_weights: constant target, weights are undefined; returning zeros")
        return FeatureWeights(tuple((nm, 0.0) for nm in names), threshold, degenerate=True)

    span = X.max(axis=0) - X.min(axis=0)
    span[span == 0] = 1.0
    Xn = np.ascontiguousarray((X - X.min(axis=0)) / span)
    yn = np.ascontiguousarray((y - y.min()) / y_span)

    if m is None or m >= n:
        anchors = np.arange(n)
    else:
        anchors = np.random.default_rng(seed).choice(n, size=m, replace=False)
    anchors = np.ascontiguousarray(anchors, dtype=np.int_)
    kk = min(k, n - 1)
    rw = rank_weights(kk, sigma)

    n_dc, n_da, n_dcda = get_kernels(backend).relief_accumulate(Xn, yn, anchors, kk, rw)
    n_da = np.asarray(n_da)
    n_dcda = np.asarray(n_dcda)
    m_eff = len(anchors)
    first = n_dcda / n_dc if n_dc > 0 else np.zeros(nf)
    second = (n_da - n_dcda) / (m_eff - n_dc) if m_eff - n_dc > 0 else np.zeros(nf)
    w = first - second
    return FeatureWeights(tuple((nm, float(v)) for nm, v in zip(names, w)), threshold)


def select_features(weights, forecastable, forced_include=()):
    """Keep features above the threshold whose future values are obtainable.

    Result is weight-descending; ``forced_include`` names are appended in
    their own weight order even when below threshold. Blade angle is
    expanded into its sine and cosine components.
    """
    forecastable = set(forecastable)
    order = {name: i for i, (name, _) in enumerate(weights.weights)}
    wmap = weights.as_dict()
    unknown = [f for f in forced_include if f not in wmap]
    if unknown:
        raise FeatureSelectionError(f"forced features not among candidates: {unknown}")
    chosen = [n for n in weights.selected if n in forecastable]
    chosen += [f for f in forced_include if f not in chosen]
    if not chosen:
        raise FeatureSelectionError(
            f"no feature passes threshold {weights.threshold} within the forecastable set "
            f"{sorted(forecastable)}; check the forecastable/forced-include configuration"
        )
    chosen.sort(key=lambda n: (-wmap[n], order[n]))
    out = []
    for name in chosen:
        out.extend(["blade_sin", "blade_cos"] if name == BLADE else [name])
    return out


# ---------------------------------------------------------------- min-max


@dataclass(frozen=True)
class NormStats:
    mins: tuple
    maxs: tuple
    feature_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if len(self.mins) != len(self.maxs):
            raise ValueError("mins and maxs differ in length")
        if any(hi < lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("max < min in NormStats")

    @property
    def n_features(self):
        return len(self.mins)

    def to_dict(self):
        return {"mins": list(self.mins), "maxs": list(self.maxs), "feature_range": list(self.feature_range)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(float(x) for x in d["mins"]), tuple(float(x) for x in d["maxs"]),
                   tuple(float(x) for x in d["feature_range"]))


def fit_norm(training, feature_range=(0.0, 1.0)):
    X = np.asarray(training, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        raise ValueError("cannot fit normalisation on an empty matrix")
    return NormStats(tuple(float(v) for v in X.min(axis=0)), tuple(float(v) for v in X.max(axis=0)),
                     (float(feature_range[0]), float(feature_range[1])))


def _prep(stats, data):
    X = np.asarray(data, dtype=float)
    flat = X.ndim == 1
    if flat:
        X = X[:, None] if stats.n_features == 1 else X[None, :]
    if X.shape[1] != stats.n_features:
        raise ValueError(f"expected {stats.n_features} column(s), got {X.shape[1]}")
    lo_x = np.array(stats.mins)
    span = np.array(stats.maxs) - lo_x
    return X, flat, lo_x, span


def _restore(stats, out, flat):
    if not flat:
        return out
    return out[:, 0] if stats.n_features == 1 else out[0]


def apply_norm(stats, data):
    """Map training min/max to ``feature_range``; constant features map to its midpoint."""
    X, flat, lo_x, span = _prep(stats, data)
    lo, hi = stats.feature_range
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = lo + (X - lo_x) / safe * (hi - lo)
    out = np.where(degenerate, (lo + hi) / 2.0, out)
    return _restore(stats, out, flat)


def invert_norm(stats, data):
    X, flat, lo_x, span = _prep(stats, data)
    lo, hi = stats.feature_range
    out = lo_x + (X - lo) / (hi - lo) * span
    return _restore(stats, out, flat)


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")
